//! The threads example in its imprecise and precise typings, every mix of
//! the two across its three modules, and two negative programs.

/// Effect annotations used by one version of the example.
struct Typing {
    thunk: &'static str,
    loop_eff: &'static str,
    sched_eff: &'static str,
    handle_eff: &'static str,
    letters: &'static str,
    numbers: &'static str,
}

const IMPRECISE: Typing = Typing {
    thunk: "1 -[?]> 1",
    loop_eff: "?",
    sched_eff: "?",
    handle_eff: "?",
    letters: "1 -[?]> 1",
    numbers: "1 -[?]> 1",
};

const PRECISE: Typing = Typing {
    thunk: "1 -[fork,print,yield]> 1",
    loop_eff: "",
    sched_eff: "",
    handle_eff: "",
    letters: "1 -[print,yield]> 1",
    numbers: "1 -[fork,print]> 1",
};

fn typing(precise: bool) -> &'static Typing {
    if precise {
        &PRECISE
    } else {
        &IMPRECISE
    }
}

fn imports(t: &Typing) -> String {
    format!(
        "  import Operations.print : str ~> 1\n  import Operations.yield : 1 ~> 1\n  import Operations.fork  : ({}) ~> 1\n",
        t.thunk
    )
}

fn operations(t: &Typing) -> String {
    format!(
        "module Operations where\n  effect print : str ~> 1\n  effect yield : 1 ~> 1\n  effect fork  : ({}) ~> 1\n",
        t.thunk
    )
}

fn scheduler(t: &Typing) -> String {
    let (th, le, se, he) = (t.thunk, t.loop_eff, t.sched_eff, t.handle_eff);
    format!(
        "module Scheduler where\n{imports}\
  define sch-loop : Queue ({th}) -[{le}]> str -[{le}]> str = lambda q.
    match q with
      | empty -> lambda s : str. s
      | dequeue(thunk, q') -> shallow-handle thunk() at [{he}] (str -[{he}]> str) with
          | ret _ -> sch-loop q'
          | fork(new, k) -> sch-loop (enqueue (enqueue q' new) k)
          | yield(_, k) -> sch-loop (enqueue q' k)
          | print(s, k) -> lambda s' : str. sch-loop (enqueue q' k) (s' ++ s)
  define scheduler : ({th}) -[{se}]> str = lambda thunk.
    sch-loop (enqueue empty thunk) \"\"
",
        imports = imports(t)
    )
}

fn main_module(t: &Typing) -> String {
    format!(
        "module Main where\n{imports}\
  import Scheduler.scheduler : ({th}) -[{se}]> str
  define letters : {letters} = lambda u.
    print(\"a\"); yield(); print(\"b\"); ()
  define numbers : {numbers} = lambda u.
    print(\"1\"); fork(letters); print(\"2\"); ()
  define main : str =
    scheduler(numbers)
",
        imports = imports(t),
        th = t.thunk,
        se = t.sched_eff,
        letters = t.letters,
        numbers = t.numbers,
    )
}

/// The program whose Operations, Scheduler and Main modules use the precise
/// typing exactly when the corresponding flag is set.
pub fn threads(ops: bool, sched: bool, main: bool) -> String {
    let mut s = String::new();
    s.push_str(&operations(typing(ops)));
    s.push_str(&scheduler(typing(sched)));
    s.push_str(&main_module(typing(main)));
    s
}

pub fn threads_imprecise() -> String {
    format!("-- Threads with untracked effects.\n{}", threads(false, false, false))
}

pub fn threads_precise() -> String {
    format!("-- Threads with precisely tracked effects.\n{}", threads(true, true, true))
}

/// A thread downcast from `?` to a row without the effect it raises.
pub const BAD_DOWNCAST: &str = "\
-- `quiet` claims to only print, but the function behind it yields: the
-- downcast out of ? fails when yield crosses it.
module Ops where
  effect print : str ~> 1
  effect yield : 1 ~> 1

main {
  import Ops.print : str ~> 1;
  import Ops.yield : 1 ~> 1;
  define chatty : 1 -[?]> 1 = (lambda u. yield(); ());
  define quiet : 1 -[print]> 1 = chatty;
  handle quiet () at [] bool with
    | ret _ -> true
    | print(s, k) -> k ()
}
";

/// An effect imported at a type incompatible with its declaration.
pub const BAD_IMPORT: &str = "\
-- print is declared with a str request but imported with a bool one.
module Ops where
  effect print : str ~> 1

main {
  import Ops.print : bool ~> 1;
  true
}
";

fn flag(p: bool) -> char {
    if p {
        'P'
    } else {
        'I'
    }
}

/// Every corpus file as `(file name, contents)`.
pub fn files() -> Vec<(String, String)> {
    let mut out = vec![
        ("threads_imprecise.greff".to_string(), threads_imprecise()),
        ("threads_precise.greff".to_string(), threads_precise()),
    ];
    for bits in 0..8u8 {
        let (o, s, m) = (bits & 4 != 0, bits & 2 != 0, bits & 1 != 0);
        let name = format!("combo_{}{}{}.greff", flag(o), flag(s), flag(m));
        let body = format!(
            "-- Operations {}, Scheduler {}, Main {}.\n{}",
            if o { "precise" } else { "imprecise" },
            if s { "precise" } else { "imprecise" },
            if m { "precise" } else { "imprecise" },
            threads(o, s, m)
        );
        out.push((name, body));
    }
    out.push(("bad_downcast.greff".to_string(), BAD_DOWNCAST.to_string()));
    out.push(("bad_import.greff".to_string(), BAD_IMPORT.to_string()));
    out
}
