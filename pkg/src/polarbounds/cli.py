"""``polarbounds`` command line.

Every subcommand reads a JSON sweep file and writes CSV (``#`` header lines
echo the sweep) or, for ``simulate``, a JSON report. Exit codes: 0 success,
2 invalid input, 3 an ordering check requested with ``"assert": true`` failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .channels import BmsChannel, bec_tree, build_tree, sigma_from_ebn0, DEFAULT_BINS, DEFAULT_HALF_WIDTH
from .exponents import typical_exponent
from .finitelen import (
    NormalApproxConfig,
    awgn_cone_converse,
    bec_achievable,
    bec_converse,
    closed_form_pe,
    normal_approx,
    subchannel_sigmas,
)
from .ratesplit import asymptotic_exponent, capacity_only_bound, exact_exponent
from .simulator import SchemeInstance, simulate_bec

EXIT_OK, EXIT_INVALID, EXIT_ASSERT = 0, 2, 3

PARAMS = {
    "snr_db": "BIAWGN",
    "sigma": "BIAWGN",
    "eps": "BEC",
    "p": "BSC",
    "capacity": None,
}

METHODS = {
    "exponents": ("asymptotic", "exact", "naive", "capacity_only"),
    "ratesplit": ("asymptotic", "exact"),
    "finitelen": ("normal_approx", "bec_achievable", "bec_converse", "awgn_cone",
                  "closed_form_polar", "closed_form_naive"),
    "converse": ("bec_converse", "awgn_cone"),
}

TABLE_SNRS = {64: [1, 1.5, 2, 2.5, 3, 3.5, 4], 128: [0.5, 1, 1.5, 2, 2.5, 3, 3.5]}


class SpecError(ValueError):
    pass


@dataclass
class SweepSpec:
    channel: str
    param: str
    grid: list
    lam: int = 1
    n1: int | None = None
    rate: float = 0.5
    methods: list = field(default_factory=list)
    bins: int = DEFAULT_BINS
    grid_half_width: float = DEFAULT_HALF_WIDTH
    seed: int = 0
    total_bits: int | None = None
    output: str | None = None
    extra: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def channel_at(self, value: float) -> BmsChannel:
        kind = self.channel
        if self.param == "snr_db":
            return BmsChannel.biawgn(sigma_from_ebn0(value, self.rate))
        if self.param == "capacity":
            return BmsChannel.with_capacity(kind, value)
        return BmsChannel(kind, value)

    def tree_at(self, value: float, lam: int | None = None):
        ch = self.channel_at(value)
        lam = self.lam if lam is None else lam
        if ch.kind == "BEC":
            return bec_tree(ch.parameter, lam)
        return build_tree(ch, lam, self.bins, self.grid_half_width)


def parse_grid(g) -> list:
    if isinstance(g, (int, float)):
        return [float(g)]
    if isinstance(g, list):
        if not g:
            raise SpecError("grid is empty")
        return [float(x) for x in g]
    if isinstance(g, str):
        parts = g.split(":")
        if len(parts) != 3:
            raise SpecError("grid string must be lo:hi:step")
        lo, hi, step = map(float, parts)
        if step <= 0 or hi < lo:
            raise SpecError("grid needs step > 0 and hi >= lo")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + i * step, 12) for i in range(n)]
    raise SpecError("grid must be a list, a number, or 'lo:hi:step'")


def load_spec(data: dict, command: str) -> SweepSpec:
    if not isinstance(data, dict):
        raise SpecError("spec must be a JSON object")
    try:
        param = data.get("param", "snr_db")
        if param not in PARAMS:
            raise SpecError(f"param must be one of {sorted(PARAMS)}")
        channel = str(data.get("channel", PARAMS[param] or "BIAWGN")).upper()
        if channel not in ("BEC", "BSC", "BIAWGN"):
            raise SpecError("channel must be BEC, BSC or BIAWGN")
        if PARAMS[param] and PARAMS[param] != channel:
            raise SpecError(f"param {param} does not apply to {channel}")
        methods = list(data.get("methods", []))
        allowed = METHODS.get(command, ())
        bad = [m for m in methods if m not in allowed]
        if bad:
            raise SpecError(f"unknown methods {bad}; allowed: {list(allowed)}")
        spec = SweepSpec(
            channel=channel,
            param=param,
            grid=parse_grid(data["grid"]) if "grid" in data else [],
            lam=int(data.get("lambda", 1)),
            n1=None if data.get("n1") is None else int(data["n1"]),
            rate=float(data.get("rate", 0.5)),
            methods=methods or list(allowed[:1]),
            bins=int(data.get("bins", DEFAULT_BINS)),
            grid_half_width=float(data.get("grid_half_width", DEFAULT_HALF_WIDTH)),
            seed=int(data.get("seed", 0)),
            total_bits=None if data.get("total_bits") is None else int(data["total_bits"]),
            output=data.get("output"),
            raw=data,
        )
    except (KeyError, TypeError) as exc:
        raise SpecError(f"bad spec field: {exc}") from exc
    if spec.lam < 0 or spec.lam > 10:
        raise SpecError("lambda must be in [0, 10]")
    if not 0.0 <= spec.rate <= 1.0:
        raise SpecError("rate must be in [0, 1]")
    if spec.bins < 3 or spec.bins % 2 == 0:
        raise SpecError("bins must be odd and >= 3")
    if spec.n1 is not None and spec.n1 < 1:
        raise SpecError("n1 must be positive")
    return spec


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _num(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def _header(command: str, spec: SweepSpec, units: str) -> str:
    lines = [
        f"# polarbounds {__version__} {command}",
        f"# spec: {json.dumps(spec.raw, sort_keys=True, separators=(',', ':'))}",
        f"# quantization: bins={spec.bins} grid_half_width={spec.grid_half_width:g}",
        f"# units: {units}",
    ]
    return "\n".join(lines) + "\n"


def _table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _rates(rates) -> str:
    return ";".join(_num(r) for r in rates)


def _bits(bits) -> str:
    return ";".join(str(int(b)) for b in bits)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_exponents(spec: SweepSpec) -> tuple[str, int]:
    rows = []
    for v in spec.grid:
        ch = spec.channel_at(v)
        tree = None
        for m in spec.methods:
            rates = ""
            if m == "capacity_only":
                val = capacity_only_bound(ch.capacity, spec.rate, spec.lam)
            elif m == "naive":
                src = ch if ch.kind != "BIAWGN" else spec.tree_at(v, 0).root
                val = typical_exponent(src, spec.rate, spec.n1) / 2**spec.lam
            else:
                tree = tree or spec.tree_at(v)
                if m == "exact":
                    if spec.n1 is None:
                        raise SpecError("method exact needs n1")
                    res = exact_exponent(tree, spec.rate, spec.n1)
                else:
                    res = asymptotic_exponent(tree, spec.rate)
                val, rates = res.value, _rates(res.rates)
            rows.append([_num(v), m, _num(val), rates])
    text = _header("exponents", spec, "exponent in nats per channel use; rates in bits")
    return text + _table([spec.param, "method", "value", "rates"], rows), EXIT_OK


def cmd_ratesplit(spec: SweepSpec) -> tuple[str, int]:
    rows = []
    for v in spec.grid:
        tree = spec.tree_at(v)
        for m in spec.methods:
            if m == "exact":
                if spec.n1 is None:
                    raise SpecError("method exact needs n1")
                res = exact_exponent(tree, spec.rate, spec.n1)
                bits = _bits(res.bits)
            else:
                res = asymptotic_exponent(tree, spec.rate)
                bits = ""
            rows.append([_num(v), m, _num(res.value), _rates(res.rates), bits])
    text = _header("ratesplit", spec, "exponent in nats; rates in bits per use")
    return text + _table([spec.param, "method", "value", "rates", "bits"], rows), EXIT_OK


def _finite_rows(spec: SweepSpec, command: str) -> tuple[list, bool]:
    if spec.n1 is None:
        raise SpecError(f"{command} needs n1")
    cfg = NormalApproxConfig(spec.raw.get("correction", "auto"))
    sigma_rule = spec.raw.get("sigma_rule", "capacity")
    fixed_at = spec.raw.get("fixed_rates_at")
    fixed = None
    if fixed_at is not None:
        fixed = bec_achievable(spec.tree_at(float(fixed_at)), spec.rate, spec.n1, total_bits=spec.total_bits).bits
    rows, ordered = [], True
    for v in spec.grid:
        tree = spec.tree_at(v)
        found = {}
        for m in spec.methods:
            if m in ("bec_achievable", "bec_converse") and tree.channel.kind != "BEC":
                raise SpecError(f"{m} needs a BEC channel")
            if m == "normal_approx":
                res = normal_approx(tree, spec.rate, spec.n1, cfg, total_bits=spec.total_bits)
            elif m == "bec_achievable":
                res = bec_achievable(tree, spec.rate, spec.n1, total_bits=spec.total_bits)
                if fixed is not None:
                    fr = bec_achievable(tree, spec.rate, spec.n1, bits=fixed, total_bits=spec.total_bits)
                    rows.append([_num(v), "bec_achievable_fixed", _num(fr.value), _bits(fr.bits)])
            elif m == "bec_converse":
                res = bec_converse(tree, spec.rate, spec.n1, total_bits=spec.total_bits)
            elif m == "awgn_cone":
                res = awgn_cone_converse(subchannel_sigmas(tree, sigma_rule), spec.rate, spec.n1,
                                         total_bits=spec.total_bits)
            else:
                mode = "polar" if m == "closed_form_polar" else "naive"
                val = closed_form_pe(tree, spec.rate, spec.n1 * 2**spec.lam, mode)
                rows.append([_num(v), m, _num(val), ""])
                found[m] = val
                continue
            rows.append([_num(v), m, _num(res.value), _bits(res.bits)])
            found[m] = res.value
        if "bec_converse" in found and "bec_achievable" in found:
            ordered &= found["bec_converse"] <= found["bec_achievable"]
    return rows, ordered


def cmd_finitelen(spec: SweepSpec, command: str = "finitelen") -> tuple[str, int]:
    rows, ordered = _finite_rows(spec, command)
    text = _header(command, spec, "frame error rate; rates as information bits per outer code")
    text += _table([spec.param, "method", "value", "rates"], rows)
    code = EXIT_OK
    if spec.raw.get("assert") and not ordered:
        code = EXIT_ASSERT
    return text, code


def cmd_converse(spec: SweepSpec) -> tuple[str, int]:
    return cmd_finitelen(spec, "converse")


def cmd_tables(spec: SweepSpec) -> tuple[str, int]:
    n1 = spec.n1 or 64
    grid = spec.grid or TABLE_SNRS.get(n1, TABLE_SNRS[64])
    rows = []
    for snr in grid:
        tree = build_tree(BmsChannel.biawgn(sigma_from_ebn0(snr, spec.rate)), spec.lam, spec.bins, spec.grid_half_width)
        res = normal_approx(tree, spec.rate, n1)
        rows.append([_num(snr)] + [str(b) for b in res.bits] + [_num(res.value)])
    text = _header("tables", spec, "Eb/N0 in dB; information bits per outer code of length n1")
    head = ["snr_db"] + [f"bits{i}" for i in range(2**spec.lam)] + ["fer_normal_approx"]
    return text + _table(head, rows), EXIT_OK


def cmd_simulate(spec: SweepSpec) -> tuple[str, int]:
    raw = spec.raw
    if spec.n1 is None:
        raise SpecError("simulate needs n1")
    trials = int(raw.get("trials", 10000))
    if trials < 1:
        raise SpecError("trials must be >= 1")
    mode = raw.get("mode", "genie")
    tie = raw.get("tie_break", "error")
    if mode not in ("genie", "true_sc") or tie not in ("error", "random"):
        raise SpecError("mode must be genie|true_sc and tie_break error|random")
    design_eps = float(raw.get("design_eps", spec.grid[0] if spec.grid else 0.5))
    bits = raw.get("bits")
    if bits is None:
        bits = bec_achievable(bec_tree(design_eps, spec.lam), spec.rate, spec.n1, total_bits=spec.total_bits).bits
    scheme = SchemeInstance.random(spec.lam, spec.n1, bits, spec.seed)
    reports = []
    for eps in spec.grid or [design_eps]:
        rep = simulate_bec(scheme, eps, trials, mode, bool(raw.get("ensemble", False)), tie)
        d = rep.to_dict()
        tree = bec_tree(eps, spec.lam)
        d["bec_achievable"] = bec_achievable(tree, spec.rate, spec.n1, bits=scheme.bits, total_bits=sum(scheme.bits)).value
        d["bec_converse"] = bec_converse(tree, spec.rate, spec.n1, bits=scheme.bits, total_bits=sum(scheme.bits)).value
        reports.append(d)
    out = {"spec": raw, "reports": reports}
    code = EXIT_OK
    if raw.get("assert"):
        ok = all(r["ci_low"] <= r["bec_achievable"] and r["ci_high"] >= r["bec_converse"] for r in reports)
        code = EXIT_OK if ok else EXIT_ASSERT
    return json.dumps(out, indent=2, sort_keys=True) + "\n", code


COMMANDS = {
    "exponents": cmd_exponents,
    "ratesplit": cmd_ratesplit,
    "finitelen": cmd_finitelen,
    "converse": cmd_converse,
    "simulate": cmd_simulate,
    "tables": cmd_tables,
}

HELP = {
    "exponents": "error-exponent curves (asymptotic, exact, naive, capacity_only)",
    "ratesplit": "optimal outer-code rates for each sweep point",
    "finitelen": "finite-length bounds and normal approximation",
    "converse": "converse bounds (BEC exact, AWGN cone)",
    "simulate": "BEC Monte-Carlo with exact ML outer decoding (JSON report)",
    "tables": "normal-approximation rate tables over an SNR grid",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polarbounds", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name], description=HELP[name])
        sp.add_argument("spec", nargs="?", help="JSON sweep file ('-' for stdin)")
        sp.add_argument("-o", "--output", help="write here instead of stdout (overrides the spec)")
        if name == "tables":
            sp.add_argument("--n1", type=int, help="outer length (64 or 128 have built-in SNR grids)")
    return p


def _read_spec(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = sys.stdin.read() if path == "-" else open(path).read()
        return json.loads(text)
    except OSError as exc:
        raise SpecError(f"cannot read spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec is not valid JSON: {exc}") from exc


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = _read_spec(args.spec)
        if args.command == "tables":
            data.setdefault("param", "snr_db")
            data.setdefault("channel", "BIAWGN")
            if getattr(args, "n1", None):
                data["n1"] = args.n1
        elif args.spec is None:
            raise SpecError(f"{args.command} needs a spec file")
        spec = load_spec(data, args.command)
        text, code = COMMANDS[args.command](spec)
    except (SpecError, ValueError) as exc:
        print(f"polarbounds: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = args.output or spec.output
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code == EXIT_ASSERT:
        print("polarbounds: ordering check failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
