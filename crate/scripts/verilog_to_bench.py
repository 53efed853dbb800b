#!/usr/bin/env python3
"""Convert flat gate-primitive structural Verilog (ISCAS style) to .bench.

Usage: verilog_to_bench.py IN.v OUT.bench

Handles `input`/`output` declarations, the primitives and/nand/or/nor/xor/
xnor/not/buf, `assign a = b;` (emitted as BUFF) and `ff` instances with
named .D/.Q pins (emitted as DFF; the clock pin is dropped). Constant
assignments are rejected.
"""
import re
import sys

PRIMS = {"and": "AND", "nand": "NAND", "or": "OR", "nor": "NOR", "xor": "XOR",
         "xnor": "XNOR", "not": "NOT", "buf": "BUFF"}


def names(s):
    return [t.strip() for t in s.split(",") if t.strip()]


def convert(text, name):
    text = re.sub(r"//[^\n]*", "", text)
    stmts = [s.strip() for s in text.split(";")]
    inputs, outputs, gates = [], [], []
    for s in stmts:
        s = " ".join(s.split())
        if not s or s.startswith("module") or s == "endmodule" or s.startswith("wire"):
            continue
        m = re.match(r"^(input|output) (.*)$", s)
        if m:
            (inputs if m.group(1) == "input" else outputs).extend(names(m.group(2)))
            continue
        m = re.match(r"^assign (\S+) = (\S+)$", s)
        if m:
            if "'" in m.group(2):
                raise SystemExit(f"{name}: constant assignment {s!r} not representable")
            gates.append((m.group(1), "BUFF", [m.group(2)]))
            continue
        m = re.match(r"^ff \S+ ?\((.*)\)$", s)
        if m:
            pins = dict(re.findall(r"\.(\w+) ?\(([^)]*)\)", m.group(1)))
            gates.append((pins["Q"].strip(), "DFF", [pins["D"].strip()]))
            continue
        m = re.match(r"^(\w+) \S+ ?\((.*)\)$", s)
        if m and m.group(1) in PRIMS:
            ports = names(m.group(2))
            gates.append((ports[0], PRIMS[m.group(1)], ports[1:]))
            continue
        raise SystemExit(f"{name}: unrecognised statement {s!r}")
    used = {i for _, _, ins in gates for i in ins} | set(outputs)
    inputs = [i for i in inputs if i in used]  # drops unused clock ports
    out = [f"# {name}", f"# {len(inputs)} inputs, {len(outputs)} outputs, {len(gates)} gates", ""]
    out += [f"INPUT({i})" for i in inputs] + [""]
    out += [f"OUTPUT({o})" for o in outputs] + [""]
    out += [f"{o} = {k}({', '.join(ins)})" for o, k, ins in gates]
    return "\n".join(out) + "\n"


if __name__ == "__main__":
    src, dst = sys.argv[1], sys.argv[2]
    base = re.sub(r"\.v$", "", src.split("/")[-1])
    with open(src) as f:
        text = f.read()
    with open(dst, "w") as f:
        f.write(convert(text, base))
