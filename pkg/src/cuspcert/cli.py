"""Fixtures, run configuration, suite orchestration and report output.

Config files are INI text with a single ``[run]`` section::

    [run]
    group = FIX-Z2-SINGLE        # fixture name or group spec, e.g. "Z^2 * Z^2 rel a,b; c,d"
    radius = 8                   # R, defaults to the fixture's
    depth = 6                    # D, defaults to the fixture's
    delta = estimate             # or a fixed integer
    lemmas = subball1, subball2  # or "all"
    seed = 0
    sample_size = 200000         # four-point quadruples
    excursions = 1000            # certified instances per excursion lemma
    compress_samples = 200
    ddagger_pairs = 50
    ddagger_nmax = 12
    ddagger_radius =             # empty: the m - 48 delta / m - 50 delta - 5 radii
    max_vertices = 5000000
    level_metric = intrinsic
    timing = false
    out =                        # empty: standard output
    format = json                # json, csv or text

Command-line options override file values.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np
import scipy

from . import metric, surgery
from .cusped import STAR, CuspedGraph, InconclusiveError, ResourceCapError, build_cusped
from .groups import BallSizeError, MalformedWordError, parse_group_spec
from .horoball import LevelGraph, build_horoball
from .report import FAIL, INCONCLUSIVE, PASS, SCHEMA_VERSION, LemmaReport, canonical_json

PACKAGE_VERSION = "0.1.0"

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3


# ------------------------------------------------------------ fixtures

@dataclass(frozen=True)
class Fixture:
    name: str
    kind: str  # "horoball" or "cusped"
    group: str = ""
    level_graph: tuple = ()
    R: int = 0
    D: int = 0


FIXTURES = {
    "FIX-PATH9": Fixture("FIX-PATH9", "horoball", level_graph=("path", 9), D=8),
    "FIX-GRID7": Fixture("FIX-GRID7", "horoball", level_graph=("grid", 7, 7), D=6),
    "FIX-Z2-SINGLE": Fixture("FIX-Z2-SINGLE", "cusped", group="Z^2 rel a,b", R=8, D=6),
    "FIX-Z2FREE": Fixture("FIX-Z2FREE", "cusped", group="Z^2 * Z^2 rel a,b; c,d", R=10, D=5),
}


def level_graph_of(spec: tuple) -> LevelGraph:
    kind, *args = spec
    return {"path": LevelGraph.path, "cycle": LevelGraph.cycle, "grid": LevelGraph.grid}[kind](*args)


# ------------------------------------------------------------ configuration

HOROBALL_LEMMAS = ("delta", "gm310", "subball1", "subball2", "geo", "constants")
CUSPED_LEMMAS = ("delta", "subball1", "subball2", "geo", "tight", "base", "proj", "casen1",
                 "casen2", "case1", "ftable", "compress", "ddagger", "constants")
ALL_LEMMAS = tuple(dict.fromkeys(HOROBALL_LEMMAS + CUSPED_LEMMAS))


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    group: str = "FIX-Z2-SINGLE"
    radius: int | None = None
    depth: int | None = None
    delta: int | None = None  # None: estimate
    lemmas: tuple = ("all",)
    seed: int = 0
    sample_size: int = 200_000
    excursions: int = 1000
    compress_samples: int = 200
    ddagger_pairs: int = 50
    ddagger_nmax: int = 12
    ddagger_radius: int | None = None
    max_vertices: int = 5_000_000
    level_metric: str = "intrinsic"
    timing: bool = False
    out: str | None = None
    format: str = "json"

    def validate(self) -> "RunConfig":
        if self.radius is not None and self.radius < 1:
            raise UsageError("radius must be at least 1")
        if self.depth is not None and self.depth < 1:
            raise UsageError("depth must be at least 1")
        if self.delta is not None and self.delta < 0:
            raise UsageError("delta must be nonnegative")
        for name in ("sample_size", "excursions", "max_vertices", "ddagger_nmax"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be positive")
        if self.format not in ("json", "csv", "text"):
            raise UsageError(f"unknown format {self.format!r}")
        unknown = [l for l in self.lemmas if l != "all" and l not in ALL_LEMMAS]
        if unknown:
            raise UsageError(f"unknown lemma ids: {', '.join(unknown)}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lemmas"] = list(self.lemmas)
        d.pop("out")
        d.pop("format")
        return d


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    kinds = {f.name: f.type for f in fields(RunConfig)}
    kind = kinds[name]
    if name == "lemmas":
        return tuple(x.strip() for x in raw.split(",") if x.strip()) or ("all",)
    if name == "delta":
        return None if raw in ("", "estimate") else int(raw)
    if name == "timing":
        return raw.lower() in ("1", "true", "yes", "on")
    if "int" in str(kind):
        if raw == "" and "None" in str(kind):
            return None
        return int(raw)
    return raw or (None if "None" in str(kind) else raw)


def load_config(path: str | None = None, text: str | None = None) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if text is not None:
            parser.read_string(text)
        elif path is not None:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    cfg = RunConfig()
    if parser.has_section("run"):
        known = {f.name for f in fields(RunConfig)}
        for key, raw in parser.items("run"):
            if key not in known:
                raise UsageError(f"unknown config key {key!r}")
            try:
                setattr(cfg, key, _parse_value(key, raw))
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {raw!r}") from exc
    return cfg


# ------------------------------------------------------------ building

def build_space(cfg: RunConfig):
    fx = FIXTURES.get(cfg.group.upper())
    if fx is not None and fx.kind == "horoball":
        return build_horoball(level_graph_of(fx.level_graph), cfg.depth or fx.D)
    spec = fx.group if fx is not None else cfg.group
    try:
        group = parse_group_spec(spec)
    except (MalformedWordError, ValueError) as exc:
        raise UsageError(f"cannot parse group {spec!r}: {exc}") from exc
    R = cfg.radius or (fx.R if fx else 8)
    D = cfg.depth or (fx.D if fx else 6)
    return build_cusped(group, R, D, level_metric=cfg.level_metric, max_vertices=cfg.max_vertices)


def environment_stamp() -> dict:
    return {"package": PACKAGE_VERSION, "python": ".".join(map(str, sys.version_info[:2])),
            "numpy": np.__version__, "scipy": scipy.__version__, "schema_version": SCHEMA_VERSION}


# ------------------------------------------------------------ suite

@dataclass
class SuiteReport:
    config: dict
    instance: dict
    delta: int
    delta_estimate: dict | None
    reports: list = field(default_factory=list)
    environment: dict = field(default_factory=environment_stamp)

    @property
    def totals(self) -> dict:
        status = [r.status for r in self.reports]
        return {"reports": len(self.reports),
                "checked": sum(r.pairs_checked for r in self.reports),
                "skipped_uncertified": sum(r.pairs_skipped_uncertified for r in self.reports),
                "violations": sum(r.violation_count for r in self.reports),
                "passed": status.count(PASS), "failed": status.count(FAIL),
                "inconclusive": status.count(INCONCLUSIVE)}

    @property
    def exit_code(self) -> int:
        t = self.totals
        if t["failed"]:
            return EXIT_FAIL
        if t["passed"] == 0:
            return EXIT_INCONCLUSIVE
        return EXIT_PASS

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "config": self.config, "instance": self.instance,
                "delta": self.delta, "delta_estimate": self.delta_estimate,
                "environment": self.environment, "totals": self.totals,
                "reports": [r.to_dict() for r in self.reports]}

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


class Suite:
    """Runs lemma checks against one space, sharing expensive fields."""

    def __init__(self, cfg: RunConfig, space=None):
        self.cfg = cfg
        self.space = space if space is not None else build_space(cfg)
        self.cusped = isinstance(self.space, CuspedGraph)
        self._star = None
        self._sweep = None
        self.delta_estimate: metric.DeltaEstimate | None = None
        self.delta = cfg.delta

    @property
    def star(self):
        if self._star is None:
            self._star = self.space.certified_bfs(STAR)
        return self._star

    def applicable(self) -> tuple:
        return CUSPED_LEMMAS if self.cusped else HOROBALL_LEMMAS

    def ensure_delta(self) -> int:
        if self.delta is None:
            kw = {"base_field": self.star} if self.cusped else {}
            try:
                self.delta_estimate = metric.estimate_delta(self.space, self.cfg.sample_size,
                                                            self.cfg.seed, **kw)
                self.delta = metric.default_delta(self.delta_estimate.delta_hat)
            except InconclusiveError:
                self.delta = 1
        return self.delta

    def run(self, lemma: str) -> LemmaReport:
        if lemma not in self.applicable():
            kind = "cusped space" if self.cusped else "single horoball"
            rep = LemmaReport(lemma, self.instance(), self.delta)
            rep.notes.append(f"not applicable to a {kind}")
            return rep
        return getattr(self, "_" + lemma)()

    def instance(self) -> dict:
        return metric.instance_of(self.space)

    # -- individual checks
    def _delta(self) -> LemmaReport:
        rep = LemmaReport("delta", self.instance(), self.delta)
        rep.asserted = False
        if self.delta_estimate is None:
            kw = {"base_field": self.star} if self.cusped else {}
            try:
                self.delta_estimate = metric.estimate_delta(self.space, self.cfg.sample_size,
                                                            self.cfg.seed, **kw)
            except InconclusiveError as exc:
                rep.notes.append(str(exc))
                return rep
        est = self.delta_estimate
        rep.pairs_checked = est.sample_size
        rep.observe("delta_hat", est.delta_hat)
        rep.observe("doubled_defect", est.doubled_defect)
        rep.observe("exhaustive", est.exhaustive)
        rep.observe("candidates", est.candidates)
        rep.notes.append("four-point estimate: a lower bound for the constant of the full space")
        return rep

    def _levels(self) -> range:
        d = self.ensure_delta()
        top = self.space.depth_cap if not self.cusped else self.space.D
        return range(d, top)

    def _merged(self, make: Callable[[int], LemmaReport]) -> LemmaReport:
        out = None
        for m in self._levels():
            rep = make(m)
            out = rep if out is None else out.merge(rep)
        return out

    def _gm310(self) -> LemmaReport:
        return metric.verify_gm310(self.space, delta=self.ensure_delta(), timing=self.cfg.timing)

    def small_window(self, limit: int = 100_000) -> bool:
        """Whether the Cayley ball of radius R has at most ``limit`` elements."""
        if not self.cusped:
            return True
        try:
            self.space.group.ball_distances(radius=self.space.R, max_size=limit)
        except BallSizeError:
            return False
        return True

    def _subball1(self) -> LemmaReport:
        kw = {"star": self.star, "explore": self.small_window()} if self.cusped else {}
        return self._merged(lambda m: metric.verify_subball1(self.space, m, self.delta, **kw))

    def _subball2(self) -> LemmaReport:
        kw = {"star": self.star} if self.cusped else {}
        return self._merged(lambda m: metric.verify_subball2(self.space, m, self.delta, **kw))

    def _geo(self) -> LemmaReport:
        d = self.ensure_delta()
        kw = {"star": self.star} if self.cusped else {}
        return metric.check_convexity(self.space, d, d, timing=self.cfg.timing, **kw)

    def _tight_base(self):
        if not hasattr(self, "_tb"):
            self._tb = metric.verify_tight_base(self.space, self.ensure_delta(), star=self.star,
                                                timing=self.cfg.timing)
        return self._tb

    def _tight(self) -> LemmaReport:
        return self._tight_base()[0]

    def _base(self) -> LemmaReport:
        return self._tight_base()[1]

    def _sweep_reports(self) -> dict:
        if self._sweep is None:
            d = self.ensure_delta()
            g = self.space.group
            coset = g.peripheral_coset_of((), 0)
            try:
                frame = surgery.HoroballFrame(self.space, coset, d, d, self.star)
                self._sweep = surgery.excursion_sweep(frame, self.cfg.excursions, self.cfg.seed).reports
            except InconclusiveError as exc:
                reps = {}
                for name in ("proj", "casen1", "casen2", "case1"):
                    reps[name] = LemmaReport(name, self.instance(), d)
                    reps[name].notes.append(str(exc))
                self._sweep = reps
        return self._sweep

    def _proj(self) -> LemmaReport:
        return self._sweep_reports()["proj"]

    def _casen1(self) -> LemmaReport:
        return self._sweep_reports()["casen1"]

    def _casen2(self) -> LemmaReport:
        return self._sweep_reports()["casen2"]

    def _case1(self) -> LemmaReport:
        return self._sweep_reports()["case1"]

    def _ftable(self) -> LemmaReport:
        d = self.ensure_delta()
        X = self.space
        g = X.group
        inside = set(g.peripheral_letters(0))
        outside = [l for l in g.letters if l not in inside]
        if not outside:
            rep = LemmaReport("ftable", self.instance(), d)
            rep.notes.append("one peripheral coset only: no translates to compare")
            return rep
        step = outside[0]
        cosets = [g.peripheral_coset_of((step,) * j, 0) for j in range(3)]
        try:
            res = surgery.casen2_f_table(X, cosets, d, 3, d, self.star)
        except InconclusiveError as exc:
            rep = LemmaReport("ftable", self.instance(), d)
            rep.notes.append(str(exc))
            return rep
        rep = res["avoidance"]
        rep.lemma = "ftable"
        rep.observe("outer", res["outer"])
        rep.observe("table", {str(k): {str(r): f for r, f in v.items()} for k, v in res["table"].items()})
        for k, spread in res["spread"].items():
            if spread:
                rep.add_violation(k=k, spread=spread)
        return rep

    def _compress(self) -> LemmaReport:
        d = self.ensure_delta()
        rng = np.random.default_rng(self.cfg.seed)
        rep = LemmaReport("compress", self.instance(), d)
        frames: dict = {}
        for _ in range(self.cfg.compress_samples):
            psi = surgery.random_bump_path(self.space, rng, d)
            try:
                rep = surgery.compress_check(self.space, psi, d, d, self.star, frames, rep=rep)
            except InconclusiveError:
                rep.pairs_skipped_uncertified += 1
        return rep

    def _ddagger(self) -> LemmaReport:
        d = self.ensure_delta()
        X, star = self.space, self.star
        rep = LemmaReport("ddagger", self.instance(), d)
        rep.asserted = False
        rng = np.random.default_rng(self.cfg.seed)
        cert = metric._candidates(X, star)
        counts = {"plain": {}, "hat": {}}
        hat_ge_plain = 0
        window_radii = 0
        stop = not self.small_window()
        for _ in range(self.cfg.ddagger_pairs):
            i, j = rng.choice(len(cert), 2, replace=False)
            x, y = cert[int(i)], cert[int(j)]
            m = min(star.exact(x), star.exact(y))
            try:
                if not surgery.check_star(X, x, y, 10 * d, d, star).holds:
                    rep.pairs_skipped_uncertified += 1
                    continue
                w = {}
                for v in (surgery.PLAIN, surgery.HAT):
                    radius = self.cfg.ddagger_radius
                    cap = None
                    if radius is None and surgery.ddagger_radius(m, d, v) < 0:
                        # the default radii are negative at window scale
                        radius = m // 2 - (1 if v == surgery.HAT else 0)
                        cap = X.D - 1 if v == surgery.HAT else None
                        window_radii += 1
                    w[v] = surgery.search_ddagger(X, x, y, d, self.cfg.ddagger_nmax, v, star,
                                                  radius, cap, stop)
            except InconclusiveError:
                rep.pairs_skipped_uncertified += 1
                continue
            rep.pairs_checked += 1
            for v, wit in w.items():
                key = str(wit.N)
                counts[v][key] = counts[v].get(key, 0) + 1
            a, b = w[surgery.HAT].N, w[surgery.PLAIN].N
            if a is not None and b is not None and a >= b:
                hat_ge_plain += 1
        rep.observe("minimal_N_histogram", counts)
        rep.observe("hat_at_least_plain", hat_ge_plain)
        rep.observe("M", surgery.star_M(d))
        rep.observe("K", surgery.star_K(d))
        rep.observe("window_radius_searches", window_radii)
        rep.notes.append("observed minimal N only; absence means not found within the window")
        return rep

    def _constants(self) -> LemmaReport:
        rep = LemmaReport("constants", self.instance(), self.delta)
        for dl in range(1, 21):
            M, K = surgery.star_M(dl), surgery.star_K(dl)
            if M == 290 * dl + 3 and K == 580 * dl + 6:
                rep.pairs_checked += 1
            else:
                rep.add_violation(delta=dl, M=M, K=K)
        return rep


def run_suite(cfg: RunConfig, space=None) -> SuiteReport:
    """Build the space, estimate delta first, then run the requested checks."""
    cfg.validate()
    suite = Suite(cfg, space)
    wanted = suite.applicable() if "all" in cfg.lemmas else tuple(cfg.lemmas)
    reports = []
    if "delta" in wanted or cfg.delta is None:
        delta_rep = suite._delta()
        if cfg.delta is None:
            suite.ensure_delta()
        if "delta" in wanted:
            reports.append(delta_rep)
    else:
        suite.ensure_delta()
    for lemma in wanted:
        if lemma == "delta":
            continue
        try:
            reports.append(suite.run(lemma))
        except ResourceCapError as exc:
            rep = LemmaReport(lemma, suite.instance(), suite.delta)
            rep.notes.append(f"resource cap: {exc}")
            reports.append(rep)
    est = suite.delta_estimate.to_dict() if suite.delta_estimate else None
    return SuiteReport(cfg.to_dict(), suite.instance(), suite.delta, est, reports)


# ------------------------------------------------------------ output

CSV_COLUMNS = ("lemma", "status", "violation", "details")


def emit(report: SuiteReport, fmt: str = "json", path: str | None = None) -> str:
    if fmt == "json":
        text = report.to_json()
    elif fmt == "csv":
        text = to_csv(report)
    elif fmt == "text":
        text = to_text(report)
    else:
        raise UsageError(f"unknown format {fmt!r}")
    if path:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {path}: {exc}") from exc
    return text


def to_csv(report: SuiteReport) -> str:
    """One row per listed violation, after a header row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in report.reports:
        for i, v in enumerate(rep.violations):
            w.writerow([rep.lemma, rep.status, i, json.dumps(v, sort_keys=True)])
    return buf.getvalue()


def to_text(report: SuiteReport) -> str:
    lines = []
    est = report.delta_estimate
    if est:
        lines.append(f"delta estimate: delta_hat={est['delta_hat']} doubled={est['doubled_defect']} "
                     f"quadruples={est['sample_size']} exhaustive={est['exhaustive']}")
    else:
        lines.append(f"delta estimate: none (fixed delta={report.delta})")
    lines.append(f"delta used: {report.delta}")
    for rep in report.reports:
        lines.append(f"{rep.lemma:<10} {rep.status:<12} checked={rep.pairs_checked} "
                     f"skipped={rep.pairs_skipped_uncertified} violations={rep.violation_count}")
    t = report.totals
    lines.append(f"totals: passed={t['passed']} failed={t['failed']} "
                 f"inconclusive={t['inconclusive']} checked={t['checked']}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ command line

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [run] section")
    common.add_argument("--group", help="fixture name or group spec")
    common.add_argument("--radius", type=int, help="window radius R")
    common.add_argument("--depth", type=int, help="depth cap D")
    common.add_argument("--delta", help="integer or 'estimate'")
    common.add_argument("--seed", type=int)
    common.add_argument("--lemma", action="append", help="lemma id, repeatable")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv", "text"))
    common.add_argument("--max-vertices", type=int, dest="max_vertices")
    common.add_argument("--excursions", type=int)
    common.add_argument("--sample-size", type=int, dest="sample_size")
    common.add_argument("--timing", action="store_true", default=None)
    parser = _Parser(prog="cuspcert", description="Certify horoball and cusped-space distance lemmas.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("build", parents=[common], help="build the window and describe it")
    sub.add_parser("delta", parents=[common], help="four-point delta estimate")
    v = sub.add_parser("verify", parents=[common], help="run one lemma check")
    v.add_argument("lemma_id", choices=ALL_LEMMAS)
    sub.add_parser("ddagger", parents=[common], help="far-out path search")
    sub.add_parser("compress", parents=[common], help="depth compression sweep")
    e = sub.add_parser("export", parents=[common], help="write the window as edges or dot")
    e.add_argument("--graph-format", choices=("edges", "dot"), default="edges")
    sub.add_parser("all", parents=[common], help="every applicable check")
    sub.add_parser("fixtures", help="list built-in fixtures")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for name in ("group", "radius", "depth", "seed", "out", "format", "max_vertices",
                 "excursions", "sample_size", "timing"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if args.delta is not None:
        try:
            cfg.delta = _parse_value("delta", args.delta)
        except ValueError as exc:
            raise UsageError(f"bad delta {args.delta!r}") from exc
    if args.lemma:
        cfg.lemmas = tuple(args.lemma)
    return cfg.validate()


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.command == "fixtures":
        for fx in FIXTURES.values():
            print(json.dumps(asdict(fx), sort_keys=True))
        return EXIT_PASS
    try:
        cfg = config_from_args(args)
        if args.command == "build":
            space = build_space(cfg)
            info = metric.instance_of(space)
            if isinstance(space, CuspedGraph):
                star = space.certified_bfs(STAR)
                info.update(reached=len(star), certified_radius=star.certified_radius())
            else:
                info.update(vertices=len(space.vertices()))
            _write(canonical_json(info), cfg.out)
            return EXIT_PASS
        if args.command == "export":
            space = build_space(cfg)
            try:
                text = space.export_dot() if args.graph_format == "dot" else space.export_edges()
            except ResourceCapError as exc:
                raise UsageError(str(exc)) from exc
            _write(text, cfg.out)
            return EXIT_PASS
        cfg.lemmas = {"delta": ("delta",), "verify": (args.__dict__.get("lemma_id"),),
                      "ddagger": ("ddagger",), "compress": ("compress",),
                      "all": cfg.lemmas}[args.command]
        report = run_suite(cfg)
        text = emit(report, cfg.format, cfg.out)
        if not cfg.out:
            sys.stdout.write(text)
        return report.exit_code
    except UsageError as exc:
        print(f"cuspcert: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _write(text: str, path: str | None) -> None:
    if path:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {path}: {exc}") from exc
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    raise SystemExit(main())
