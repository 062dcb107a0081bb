#!/usr/bin/env python3
"""Regenerates header.v, spec.md, tb.v and script.json for each fixture task.

Expected values come from the cycle models below, written independently of
the Verilog. Values are None while unknown; no expectation is emitted then.
Convention: inputs for cycle n are applied at step n and outputs are sampled
after that step.
"""
import json
import random
import re
from pathlib import Path

HERE = Path(__file__).resolve().parent


def counter2(ins, s):
    if ins["rst"]:
        s["count"] = 0
    elif s.get("count") is not None and s["count"] < 3:
        s["count"] += 1
    return {"count": s.get("count")}


def mod10(ins, s):
    q = s.get("q")
    if ins["rst"]:
        q = 0
    elif ins["en"] and q is not None:
        q = 0 if q == 9 else q + 1
    s["q"] = q
    return {"q": q}


def edge_detect(ins, s):
    if ins["rst"]:
        s["prev"], s["rise"] = 0, 0
    else:
        prev = s.get("prev")
        s["rise"] = None if prev is None else int(ins["din"] and not prev)
        if prev is None and ins["din"] == 0:
            s["rise"] = 0
        s["prev"] = ins["din"]
    return {"rise": s.get("rise")}


def fsm3(ins, s):
    st = s.get("state")
    if ins["rst"]:
        st = 0
    elif st is not None:
        st = {0: 1 if ins["go"] else 0, 1: 2, 2: 0}.get(st, 0)
    s["state"] = st
    if st is None:
        return {"busy": None, "done": None}
    return {"busy": int(st != 0), "done": int(st == 2)}


def seq101(ins, s):
    st = s.get("state")
    d = ins["din"]
    if ins["rst"]:
        st = 0
    elif st is not None:
        st = {
            0: 1 if d else 0,
            1: 1 if d else 2,
            2: 3 if d else 0,
            3: 1 if d else 2,
        }[st]
    s["state"] = st
    return {"det": None if st is None else int(st == 3)}


def traffic(ins, s):
    if ins["rst"]:
        s["light"], s["timer"] = 0, 0
    elif s.get("timer") is not None:
        if s["timer"] < 3:
            s["timer"] += 1
        else:
            s["timer"] = 0
            s["light"] = {0: 1, 1: 2, 2: 0}.get(s["light"], 0)
    return {"light": s.get("light")}


def shift4(ins, s):
    if ins["rst"]:
        s["q"] = [0, 0, 0, 0]
    elif "q" in s:
        s["q"] = [ins["din"]] + s["q"][:3]
    return {"dout": s["q"][3] if "q" in s else None}


def pwm(ins, s):
    if ins["rst"]:
        s["cnt"] = 0
    elif s.get("cnt") is not None:
        s["cnt"] = (s["cnt"] + 1) % 8
    c = s.get("cnt")
    return {"out": None if c is None else int(c < ins["duty"])}


def pulse_stretch(ins, s):
    c = s.get("cnt")
    if ins["rst"]:
        c = 0
    elif ins["trig"]:
        c = 3
    elif c is not None and c > 0:
        c -= 1
    s["cnt"] = c
    return {"out": None if c is None else int(c != 0)}


def sync2(ins, s):
    if ins["rst"]:
        s["meta"], s["out"] = 0, 0
    elif "meta" in s:
        s["out"], s["meta"] = s["meta"], ins["async_in"]
    return {"sync_out": s.get("out")}


def updown(ins, s):
    q = s.get("q")
    if ins["rst"]:
        q = 0
    elif q is not None:
        if ins["up"] and not ins["down"]:
            q = min(q + 1, 7)
        elif ins["down"] and not ins["up"]:
            q = max(q - 1, 0)
    s["q"] = q
    return {"q": q}


def mux4(ins, s):
    return {"y": [ins["a"], ins["b"], ins["c"], ins["d"]][ins["sel"]]}


def reset_then(rng, n, gen, rst_at=()):
    rows = [dict(gen(rng, i), rst=1) for i in range(2)]
    for i in range(2, n):
        rows.append(dict(gen(rng, i), rst=1 if i in rst_at else 0))
    return rows


def bits(*names):
    return lambda rng, i: {k: rng.randint(0, 1) for k in names}


def count_up(rng, i):
    return {}


TASKS = {
    "counter2": dict(
        model=counter2,
        spec="A 2-bit up counter that saturates at 3. A synchronous, active-high "
        "reset clears it to 0.",
        stim=lambda rng: reset_then(rng, 16, count_up, rst_at={9}),
        widths={"count": 2},
    ),
    "mod10": dict(
        model=mod10,
        spec="A decade counter. While `en` is high, `q` counts 0 through 9 and "
        "wraps to 0. Synchronous active-high reset to 0.",
        stim=lambda rng: reset_then(
            rng, 36, lambda r, i: {"en": 0 if i in (14, 15, 27) else 1}, rst_at={30}
        ),
        widths={"q": 4},
    ),
    "edge_detect": dict(
        model=edge_detect,
        spec="Registered rising-edge detector: `rise` is high for one cycle "
        "after `din` goes from 0 to 1. Synchronous active-high reset clears "
        "all state.",
        stim=lambda rng: [
            dict(rst=1, din=0),
            dict(rst=1, din=1),
        ]
        + [dict(rst=0, din=v) for v in [1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 1, 0, 0, 1]],
        widths={"rise": 1},
    ),
    "edge_detect_blind": dict(
        model=edge_detect,
        spec="Registered rising-edge detector: `rise` is high for one cycle "
        "after `din` goes from 0 to 1. Synchronous active-high reset clears "
        "all state.",
        stim=lambda rng: [dict(rst=1, din=0), dict(rst=1, din=0)]
        + [dict(rst=0, din=0), dict(rst=0, din=0)]
        + [dict(rst=0, din=v) for v in [1, 0, 1, 1, 0, 0, 1, 1, 0, 1]],
        widths={"rise": 1},
        # Checks start late and din stays low across reset, so a missing
        # reset of the history register is invisible here.
        check_from=4,
    ),
    "fsm3": dict(
        model=fsm3,
        spec="Three-state controller: idle (0), run (1), done (2). `go` in idle "
        "starts a run; run always moves to done and done returns to idle. "
        "`busy` is high outside idle, `done` is high in the done state. "
        "Synchronous active-high reset to idle.",
        stim=lambda rng: reset_then(
            rng, 20, lambda r, i: {"go": 1 if i in (3, 4, 9, 13, 14, 15) else 0}
        ),
        widths={"busy": 1, "done": 1},
    ),
    "seq101": dict(
        model=seq101,
        spec="Overlapping `101` sequence detector on `din`. `det` is high in "
        "the cycle after the final 1 of the pattern is sampled. Synchronous "
        "active-high reset.",
        stim=lambda rng: reset_then(rng, 40, bits("din")),
        widths={"det": 1},
    ),
    "traffic": dict(
        model=traffic,
        spec="Traffic light sequencer. `light` steps 0 -> 1 -> 2 -> 0, holding "
        "each value for four cycles, using an internal timer. Synchronous "
        "active-high reset to light 0 with the timer cleared.",
        stim=lambda rng: reset_then(rng, 34, count_up, rst_at={25}),
        widths={"light": 2},
    ),
    "shift4": dict(
        model=shift4,
        spec="Four-stage shift register: `dout` is `din` delayed by four "
        "cycles. Synchronous active-high reset clears every stage.",
        stim=lambda rng: reset_then(rng, 30, bits("din")),
        widths={"dout": 1},
    ),
    "pwm": dict(
        model=pwm,
        spec="PWM generator with a free-running 3-bit counter. `out` is high "
        "while the counter is below `duty`. Synchronous active-high reset "
        "clears the counter.",
        stim=lambda rng: reset_then(
            rng, 40, lambda r, i: {"duty": [3, 3, 5, 0, 7, 1][min(i // 7, 5)]}
        ),
        widths={"out": 1},
    ),
    "pulse_stretch": dict(
        model=pulse_stretch,
        spec="Pulse stretcher: a `trig` pulse makes `out` high for the next "
        "three cycles (retriggerable). Synchronous active-high reset.",
        stim=lambda rng: reset_then(
            rng, 30, lambda r, i: {"trig": 1 if i in (3, 10, 12, 20, 21) else 0}
        ),
        widths={"out": 1},
    ),
    "sync2": dict(
        model=sync2,
        spec="Two-flop synchronizer: `sync_out` follows `async_in` two cycles "
        "later. Synchronous active-high reset clears both flops.",
        stim=lambda rng: reset_then(rng, 30, bits("async_in")),
        widths={"sync_out": 1},
    ),
    "updown": dict(
        model=updown,
        spec="Saturating 3-bit up/down counter. `up` alone increments up to 7, "
        "`down` alone decrements down to 0, otherwise it holds. Synchronous "
        "active-high reset to 0.",
        stim=lambda rng: reset_then(
            rng,
            36,
            lambda r, i: {"up": 1 if 2 <= i < 13 or i in (30, 31) else 0,
                          "down": 1 if 14 <= i < 26 or i in (31, 33) else 0},
        ),
        widths={"q": 3},
    ),
    "mux4": dict(
        model=mux4,
        spec="Combinational 4-to-1 multiplexer of 4-bit inputs selected by "
        "`sel`.",
        stim=lambda rng: [
            {"sel": i % 4, "a": rng.randint(0, 15), "b": rng.randint(0, 15),
             "c": rng.randint(0, 15), "d": rng.randint(0, 15)}
            for i in range(16)
        ],
        widths={"y": 4},
    ),
}

PLAN = (
    "PLAN:\nImplement the specified behavior with one clocked process for "
    "state and continuous assignments for decoded outputs.\nINVARIANTS:\n"
    "- every register has a reset value\n- outputs are known after reset\n"
)


def header_of(golden):
    m = re.search(r"module\s+\w+\s*\(.*?\);", golden, re.S)
    return m.group(0) + "\nendmodule\n"


def input_widths(golden):
    out = {}
    for m in re.finditer(r"input\s+wire\s*(\[(\d+):0\])?\s*(\w+)", golden):
        out[m.group(3)] = int(m.group(2)) + 1 if m.group(2) else 1
    return out


def lit(v, w):
    return f"{w}'d{v}"


def write_task(name, t):
    d = HERE / name
    golden = (d / "golden.v").read_text()
    (d / "header.v").write_text(header_of(golden))
    (d / "spec.md").write_text(t["spec"] + "\n")
    rng = random.Random(name)
    rows = t["stim"](rng)
    widths = input_widths(golden)
    state = {}
    lines = [f"// Official testbench for {name}. Expected values come from gen.py."]
    held = {}
    check_from = t.get("check_from", 0)
    for n, ins in enumerate(rows):
        changed = {k: v for k, v in ins.items() if held.get(k) != v}
        held.update(ins)
        if changed:
            body = " ".join(f"{k}={lit(v, widths[k])}" for k, v in sorted(changed.items()))
            lines.append(f"//@cycle {n} {body}")
        outs = t["model"](ins, state)
        if n >= check_from:
            known = {k: v for k, v in outs.items() if v is not None}
            if known:
                body = " ".join(f"{k}={lit(v, t['widths'][k])}" for k, v in sorted(known.items()))
                lines.append(f"//@expect {n} {body}")
    lines.append(f"module tb_{name};\nendmodule")
    (d / "tb.v").write_text("\n".join(lines) + "\n")
    script = {
        "planner": [PLAN],
        "coder": [{"file": "golden.v"}],
        "reflexion": [{"file": "golden.v"}],
        "stage_b": [{"file": "golden.v"}],
    }
    (d / "script.json").write_text(json.dumps(script, indent=2) + "\n")


if __name__ == "__main__":
    for name, t in TASKS.items():
        write_task(name, t)
