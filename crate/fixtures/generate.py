#!/usr/bin/env python3
"""Writes the fixture domains, problems, oracle and upfront files.

Run from anywhere: `python3 fixtures/generate.py`. Output is deterministic;
the committed fixtures are exactly what this script produces.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent

# ---------------------------------------------------------------- blocksworld

BLOCKS = list("ABCDEFGH")


def bw_domain():
    stack_methods = "\n".join(
        f"""   (:method Stackon{x} (Clear ?b)
      ((Covered ?b) (Base ?b ?r) (Top ?t ?r) (On ?t ?z) (Clear {x}) (Top {x} ?s) (Diff ?r ?s))
      ((stack ?t {x} ?z ?r ?s) (Clear ?b)))"""
        for x in BLOCKS
    )
    return f"""; Blocks world with tower bookkeeping.
;
; (Base ?x ?r): ?r is the bottom block of ?x's tower (a table block is its
; own base). (Top ?t ?r): ?t is the topmost block of the tower based at ?r.
; (Diff ?x ?y) is static and holds for distinct blocks. (Space Table) says
; blocks may be put down on the table.
;
; (Clear ?b) moves the topmost block of ?b's tower, one at a time, either
; onto the table or onto the top of another tower, until ?b is clear.
(defdomain blocksworld
  ((:predicate On 2)
   (:predicate OnTable 1)
   (:predicate Clear 1)
   (:predicate Covered 1)
   (:predicate Base 2)
   (:predicate Top 2)
   (:predicate Diff 2)
   (:predicate Space 1)

   (:operator (put-on-table ?x ?z ?r)
      ((Clear ?x) (On ?x ?z) (Top ?x ?r) (Space Table))
      ((On ?x ?z) (Top ?x ?r) (Base ?x ?r) (Covered ?z))
      ((OnTable ?x) (Clear ?z) (Top ?z ?r) (Top ?x ?x) (Base ?x ?x)))
   (:operator (stack ?x ?y ?z ?r ?s)
      ((Clear ?x) (Clear ?y) (On ?x ?z) (Top ?x ?r) (Top ?y ?s))
      ((On ?x ?z) (Clear ?y) (Top ?x ?r) (Top ?y ?s) (Base ?x ?r) (Covered ?z))
      ((On ?x ?y) (Clear ?z) (Clear ?x) (Top ?z ?r) (Top ?x ?s) (Base ?x ?s) (Covered ?y)))
   (:operator (stack-from-table ?x ?y ?s)
      ((Clear ?x) (OnTable ?x) (Clear ?y) (Top ?y ?s))
      ((OnTable ?x) (Clear ?y) (Top ?y ?s) (Top ?x ?x) (Base ?x ?x))
      ((On ?x ?y) (Clear ?x) (Top ?x ?s) (Base ?x ?s) (Covered ?y)))

   (:method ClearDone (Clear ?b) ((Clear ?b)) ())
{stack_methods}
   (:method PutOnTable (Clear ?b)
      ((Covered ?b) (Base ?b ?r) (Top ?t ?r) (On ?t ?z) (Space Table))
      ((put-on-table ?t ?z ?r) (Clear ?b)))

   (:method PutDone (Put ?x ?y) ((On ?x ?y)) ())
   (:method PutMove (Put ?x ?y) () ((Clear ?x) (Clear ?y) (Move ?x ?y)))

   (:method MoveFromBlock (Move ?x ?y) ((On ?x ?z) (Top ?x ?r) (Top ?y ?s)) ((stack ?x ?y ?z ?r ?s)))
   (:method MoveFromTable (Move ?x ?y) ((OnTable ?x) (Top ?y ?s)) ((stack-from-table ?x ?y ?s)))))
"""


def bw_state(towers, table_space=True):
    """Facts for a list of towers, each listed bottom to top."""
    facts = []
    blocks = [b for t in towers for b in t]
    for t in towers:
        base, top = t[0], t[-1]
        facts.append(f"(OnTable {base})")
        for below, above in zip(t, t[1:]):
            facts.append(f"(On {above} {below})")
            facts.append(f"(Covered {below})")
        facts.append(f"(Clear {top})")
        facts.append(f"(Top {top} {base})")
        for b in t:
            facts.append(f"(Base {b} {base})")
    for x in sorted(blocks):
        for y in sorted(blocks):
            if x != y:
                facts.append(f"(Diff {x} {y})")
    if table_space:
        facts.append("(Space Table)")
    return facts


def bw_problem(name, towers, goal_towers, table_space=True):
    tasks = []
    goal = []
    for t in goal_towers:
        for below, above in zip(t, t[1:]):
            tasks.append(f"(Put {above} {below})")
            goal.append(f"(On {above} {below})")
    return fmt_problem(name, "blocksworld", bw_state(towers, table_space), tasks, goal)


def fmt_problem(name, domain, facts, tasks, goal, comment=None):
    lines = []
    if comment:
        lines += [f"; {c}" for c in comment]
    lines.append(f"(defproblem {name} {domain}")
    lines.append("  (" + "\n   ".join(facts) + ")")
    lines.append("  (" + " ".join(tasks) + ")")
    lines.append("  (" + " ".join(goal) + "))")
    return "\n".join(lines) + "\n"


def random_towers(rng, blocks):
    blocks = blocks[:]
    rng.shuffle(blocks)
    towers = []
    for b in blocks:
        if towers and rng.random() < 0.6:
            rng.choice(towers).append(b)
        else:
            towers.append([b])
    return towers


def table_strategy_solves(towers, goal_towers):
    """Simulates clearing by unstacking onto the table, then stacking, for
    each goal pair bottom-up; true if every goal pair holds at the end."""
    on = {}
    for t in towers:
        on[t[0]] = None
        for below, above in zip(t, t[1:]):
            on[above] = below

    def above(b):
        return next((x for x, y in on.items() if y == b), None)

    def clear(b):
        while (a := above(b)) is not None:
            clear(a)
            on[a] = None

    pairs = [(a, b) for t in goal_towers for b, a in zip(t, t[1:])]
    for x, y in pairs:
        if on[x] == y:
            continue
        clear(x)
        clear(y)
        on[x] = y
    return all(on[x] == y for x, y in pairs)


def blocksworld(out):
    out.mkdir(parents=True, exist_ok=True)
    (out / "domain.dom").write_text(bw_domain())
    fig1 = fmt_problem(
        "fig1",
        "blocksworld",
        bw_state([["B", "A", "F"], ["C", "E"], ["D"]]),
        ["(Clear B)"],
        [],
        comment=["F on A on B, E on C, D alone; the task is to clear B."],
    )
    (out / "fig1.prob").write_text(fig1)
    rules = [
        f"""(rule ((Space Table) (Clear {x})) (Clear ?b)
  (pref table-not-{x.lower()} ((Space Table) (Clear {x})) (Clear ?b) (:prefer PutOnTable) (:avoid Stackon{x}))
  :max-uses 1)"""
        for x in reversed(BLOCKS)
    ]
    (out / "oracle.orc").write_text(
        "; Whenever a tower must be taken apart, the expert prefers the table\n"
        "; and warns against burying whichever clear block caught their eye.\n"
        + "\n".join(rules)
        + "\n"
    )
    (out / "upfront.prefs").write_text(
        "; Written before planning: clear towers onto the table, not onto E.\n"
        "(pref p1 ((Space Table)) (Clear ?b) (:prefer PutOnTable) (:avoid StackonE))\n"
    )
    rng = random.Random(1)
    names = []
    for i in range(1, 13):
        n = 5 + (i % 3)
        blocks = BLOCKS[:n]
        while True:
            start = random_towers(rng, blocks)
            goal = random_towers(rng, blocks)
            if table_strategy_solves(start, goal):
                break
        name = f"bw-{i:02d}"
        (out / f"{name}.prob").write_text(bw_problem(name, start, goal))
        names.append(name)
    return names


# ---------------------------------------------------------------- hanoi

PEGS = ["P1", "P2", "P3", "P4"]

HANOI_DOMAIN = """; Towers of Hanoi on four pegs.
;
; (Place ?d ?x) leaves disk ?d directly on ?x (a disk or a peg). Disks above
; a block in the way are parked one at a time: on a spare empty peg, on the
; empty target peg, or on a larger clear disk. (Smaller ?d ?x) is static and
; holds for every disk below every larger disk and every peg.
(defdomain hanoi
  ((:predicate On 2)
   (:predicate Clear 1)
   (:predicate Disk 1)
   (:predicate Smaller 2)
   (:predicate Spare 1)
   (:predicate Target 1)

   (:operator (move ?d ?from ?to)
      ((Disk ?d) (On ?d ?from) (Clear ?d) (Clear ?to) (Smaller ?d ?to))
      ((On ?d ?from) (Clear ?to))
      ((On ?d ?to) (Clear ?from)))

   (:method PlaceDone (Place ?d ?x) ((On ?d ?x)) ())
   (:method PlaceMove (Place ?d ?x) () ((Uncover ?d) (Uncover ?x) (Shift ?d ?x)))

   (:method Uncovered (Uncover ?y) ((Clear ?y)) ())
   (:method Unstack (Uncover ?y) ((On ?z ?y)) ((Uncover ?z) (Park ?z)))

   (:method ToDisk (Park ?z) ((On ?z ?f) (Disk ?w) (Clear ?w) (Smaller ?z ?w)) ((move ?z ?f ?w)))
   (:method ToSpare (Park ?z) ((On ?z ?f) (Spare ?p) (Clear ?p)) ((move ?z ?f ?p)))
   (:method ToTarget (Park ?z) ((On ?z ?f) (Target ?p) (Clear ?p)) ((move ?z ?f ?p)))

   (:method Shift (Shift ?d ?x) ((On ?d ?f)) ((move ?d ?f ?x)))))
"""


def hanoi_problem(name, rng, n):
    disks = [f"D{i}" for i in range(1, n + 1)]
    target = rng.choice(PEGS)
    while True:
        where = {d: rng.choice(PEGS) for d in disks}
        if any(where[d] != target for d in disks):
            break
    facts = []
    for p in PEGS:
        stack = [d for d in reversed(disks) if where[d] == p]
        below = p
        for d in stack:
            facts.append(f"(On {d} {below})")
            below = d
        facts.append(f"(Clear {below})")
        facts.append(f"(Target {p})" if p == target else f"(Spare {p})")
    for i, d in enumerate(disks):
        facts.append(f"(Disk {d})")
        for bigger in disks[i + 1 :] + PEGS:
            facts.append(f"(Smaller {d} {bigger})")
    chain = [target] + list(reversed(disks))
    tasks = [f"(Place {d} {x})" for x, d in zip(chain, chain[1:])]
    goal = [f"(On {d} {x})" for x, d in zip(chain, chain[1:])]
    return fmt_problem(name, "hanoi", facts, tasks, goal)


def hanoi(out):
    out.mkdir(parents=True, exist_ok=True)
    (out / "domain.dom").write_text(HANOI_DOMAIN)
    rng = random.Random(2)
    names = []
    for i in range(1, 13):
        name = f"hanoi-{i:02d}"
        (out / f"{name}.prob").write_text(hanoi_problem(name, rng, 3 + i % 3))
        names.append(name)
    rules = [
        f"""(rule ((Spare {p}) (Clear {p})) (Park ?z)
  (pref spare-{p.lower()} ((Spare {p}) (Clear {p})) (Park ?z) (:prefer ToSpare) (:avoid ToDisk))
  :max-uses 1)"""
        for p in PEGS
    ]
    (out / "oracle.orc").write_text(
        "; The expert parks on an empty spare peg while one is free, rather than\n"
        "; piling disks onto each other.\n" + "\n".join(rules) + "\n"
    )
    (out / "upfront.prefs").write_text(
        "; Written before planning: keep the target peg free for the tower.\n"
        "(pref keep-target () (Park ?z) (:prefer) (:avoid ToTarget))\n"
    )
    return names


# ---------------------------------------------------------------- rockets

ROCKETS_DOMAIN = """; Rockets: packages travel between locations by rocket.
;
; A package is either carried straight away (fetch, load, fly, unload) or
; stowed aboard a rocket that is already at its location, to be dropped off
; once the individual deliveries are done. (Waiting ?p ?d) marks a stowed
; package bound for ?d.
(defdomain rockets
  ((:predicate At 2)
   (:predicate In 2)
   (:predicate Rocket 1)
   (:predicate Route 2)
   (:predicate Waiting 2)

   (:operator (load ?p ?r ?l)
      ((At ?p ?l) (At ?r ?l) (Rocket ?r))
      ((At ?p ?l))
      ((In ?p ?r)))
   (:operator (unload ?p ?r ?l)
      ((In ?p ?r) (At ?r ?l))
      ((In ?p ?r))
      ((At ?p ?l)))
   (:operator (stow ?p ?r ?l ?d)
      ((At ?p ?l) (At ?r ?l) (Rocket ?r))
      ((At ?p ?l))
      ((In ?p ?r) (Waiting ?p ?d)))
   (:operator (drop ?p ?r ?d)
      ((In ?p ?r) (At ?r ?d) (Waiting ?p ?d))
      ((In ?p ?r) (Waiting ?p ?d))
      ((At ?p ?d)))
   (:operator (fly ?r ?from ?to)
      ((Rocket ?r) (At ?r ?from) (Route ?from ?to))
      ((At ?r ?from))
      ((At ?r ?to)))

   (:method AlreadyThere (Deliver ?p ?d) ((At ?p ?d)) ())
   (:method Carry (Deliver ?p ?d)
      ((At ?p ?l) (Rocket ?r))
      ((Fly ?r ?l) (load ?p ?r ?l) (Fly ?r ?d) (unload ?p ?r ?d)))
   (:method Stow (Deliver ?p ?d)
      ((At ?p ?l) (Rocket ?r) (At ?r ?l))
      ((stow ?p ?r ?l ?d)))

   (:method Finished (FinishDeliveries) () ())
   (:method DropOff (FinishDeliveries)
      ((Waiting ?p ?d) (In ?p ?r))
      ((Fly ?r ?d) (drop ?p ?r ?d) (FinishDeliveries)))

   (:method Stay (Fly ?r ?to) ((At ?r ?to)) ())
   (:method Go (Fly ?r ?to) ((At ?r ?from) (Route ?from ?to)) ((fly ?r ?from ?to)))))
"""

PLACES = ["Earth", "Mars", "Moon", "Venus"]


def rockets_problem(name, rng, n):
    places = PLACES[: 3 + rng.randrange(2)]
    facts = [f"(Route {a} {b})" for a in places for b in places if a != b]
    rockets = ["R1"] if n < 5 else ["R1", "R2"]
    for r in rockets:
        facts += [f"(Rocket {r})", f"(At {r} {rng.choice(places)})"]
    hubs = rng.sample(places, 2)
    tasks, goal = [], []
    for i in range(1, n + 1):
        p = f"pkg{i}"
        src = rng.choice(hubs)
        dst = rng.choice([x for x in places if x != src])
        facts.append(f"(At {p} {src})")
        tasks.append(f"(Deliver {p} {dst})")
        goal.append(f"(At {p} {dst})")
    tasks.append("(FinishDeliveries)")
    return fmt_problem(name, "rockets", facts, tasks, goal)


def rockets(out):
    out.mkdir(parents=True, exist_ok=True)
    (out / "domain.dom").write_text(ROCKETS_DOMAIN)
    rng = random.Random(3)
    names = []
    for i in range(1, 13):
        name = f"rockets-{i:02d}"
        (out / f"{name}.prob").write_text(rockets_problem(name, rng, 3 + i % 4))
        names.append(name)
    (out / "oracle.orc").write_text(
        "; The expert stows a package whenever a rocket is already at hand, and\n"
        "; never declares the job finished while something is still aboard.\n"
        "(rule ((At ?p ?l) (At ?r ?l) (Rocket ?r)) (Deliver ?p ?d)\n"
        "  (pref stow-here ((At ?p ?l) (At ?r ?l) (Rocket ?r)) (Deliver ?p ?d) (:prefer Stow) (:avoid Carry)))\n"
        "(rule ((Waiting ?p ?d)) (FinishDeliveries)\n"
        "  (pref drop-first ((Waiting ?p ?d)) (FinishDeliveries) (:prefer DropOff) (:avoid Finished)))\n"
    )
    (out / "upfront.prefs").write_text(
        "; Written before planning: unload everything before finishing.\n"
        "(pref drop-first ((Waiting ?p ?d)) (FinishDeliveries) (:prefer DropOff) (:avoid Finished))\n"
    )
    return names



# ---------------------------------------------------------------- kl

KL_ROUTES = {
    "detour-6-8": {"North": 6, "South": 8},
    "detour-5-9": {"East": 5, "West": 9},
    "detour-6-8-10": {"North": 6, "South": 8, "West": 10},
}


def detour(name, routes):
    """Every route starts with the same steps, so a short rollout cannot
    tell them apart; only exhaustive search sees which one is shorter."""
    methods = []
    facts = ["(At Start)"]
    for route, n in routes.items():
        stops = [f"{route}{i}" for i in range(1, n)] + ["Home"]
        hops = " ".join(f"(Go {x})" for x in stops)
        methods.append(f"   (:method Via{route} (Travel) () ({hops}))")
        for a, b in zip(["Start"] + stops, stops):
            facts.append(f"(Link {a} {b})")
    domain = f"""; Travel from Start to Home along one of several routes.
(defdomain {name}
  ((:predicate At 1)
   (:predicate Link 2)

   (:operator (step ?from ?to)
      ((At ?from) (Link ?from ?to))
      ((At ?from))
      ((At ?to)))

{chr(10).join(methods)}

   (:method Hop (Go ?to) ((At ?from) (Link ?from ?to)) ((step ?from ?to)))))
"""
    problem = fmt_problem(name, name, facts, ["(Travel)"], ["(At Home)"])
    best = min(routes, key=routes.get)
    prefs = f"(pref shortest () (Travel) (:prefer Via{best}) (:avoid))\n"
    return domain, problem, prefs


def kl(out):
    out.mkdir(parents=True, exist_ok=True)
    for name, routes in KL_ROUTES.items():
        domain, problem, prefs = detour(name, routes)
        (out / f"{name}.dom").write_text(domain)
        (out / f"{name}.prob").write_text(problem)
        (out / f"{name}.prefs").write_text(prefs)
    return list(KL_ROUTES)


def main():
    bw = blocksworld(ROOT / "blocksworld")
    print("blocksworld:", len(bw), "problems")
    ha = hanoi(ROOT / "hanoi")
    print("hanoi:", len(ha), "problems")
    ro = rockets(ROOT / "rockets")
    print("rockets:", len(ro), "problems")
    print("kl:", len(kl(ROOT / "kl")), "fixtures")


if __name__ == "__main__":
    main()
