"""Command line interface: config handling, pipeline orchestration, artifacts.

Every command is a pure function of (config, input files): identical runs
produce byte-identical outputs. Exit codes: 0 success, 1 usage/config error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .changepoint import ChangePointReport, RateInputs, RATE_TARGETS, default_bandwidth, detect, rate_calculator, scan
from .clime import ClimeError, stability_select_lambda, support, tv_clime_path
from .evaluate import roc_points_csv, roc_sweep, run_table_experiment, table_rows_json
from .kernels import KernelSpec
from .panel import TimeSeriesPanel
from .plots import roc_plot, scan_plot
from .sim import IllConditionedError, build_sim_design, simulate_panel

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

NUMERICAL_ERRORS = (ClimeError, IllConditionedError, np.linalg.LinAlgError, FloatingPointError)


@dataclass
class PipelineConfig:
    """Resolved run configuration; flags mirror these fields."""

    input: str | None = None
    report: str | None = None
    n: int = 1000
    p: int = 50
    delta0: float = 1.0
    seed: int = 0
    h: float | str = "auto"
    nu: float | str = "auto"
    exclusion: int | None = None
    b: float = 0.2
    kernel: str = "uniform"
    lam: float | str = 0.06
    lambda_grid: list = field(default_factory=lambda: [0.02, 0.04, 0.06, 0.08, 0.1])
    u: float = 0.05
    grid: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    u_grid: list = field(default_factory=lambda: list(np.geomspace(1e-3, 1.5, 25)))
    roc_truth: float | str = "matching"
    replications: int = 20
    output_dir: str = "out"
    plots: bool = True
    rates: dict = field(default_factory=dict)

    def resolved_h(self, n: int) -> float:
        return default_bandwidth(n) if self.h == "auto" else float(self.h)

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.kernel, float(self.b))

    def to_json(self, path) -> None:
        doc = asdict(self)
        doc["lambda"] = doc.pop("lam")
        doc["u_grid"] = [float(x) for x in doc["u_grid"]]
        Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


_JSON_KEYS = {f.name for f in PipelineConfig.__dataclass_fields__.values()} | {"lambda"}


def load_config(path=None, overrides=None) -> PipelineConfig:
    cfg = PipelineConfig()
    doc = {}
    if path is not None:
        doc = json.loads(Path(path).read_text())
        unknown = set(doc) - _JSON_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for source in (doc, overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            setattr(cfg, "lam" if key == "lambda" else key, value)
    return cfg


def _numeric_or(value, *allowed):
    """Parse CLI strings like '0.2' / 'auto' into float or the allowed token."""
    if isinstance(value, str):
        if value in allowed:
            return value
        return float(value)
    return value


def _ensure_panel(cfg: PipelineConfig, out: Path):
    """Load the input panel, or simulate one (writing panel.csv + design.json)."""
    if cfg.input is not None:
        return TimeSeriesPanel.from_csv(cfg.input), None
    design = build_sim_design(cfg.n, cfg.p, cfg.delta0, cfg.seed)
    panel = simulate_panel(design)
    panel.to_csv(out / "panel.csv")
    design.to_json(out / "design.json")
    return panel, design


def _prepare(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.to_json(out / "config_used.json")
    return out


def cmd_simulate(cfg: PipelineConfig) -> int:
    out = _prepare(cfg)
    design = build_sim_design(cfg.n, cfg.p, cfg.delta0, cfg.seed)
    simulate_panel(design).to_csv(out / "panel.csv")
    design.to_json(out / "design.json")
    print(f"wrote {out / 'panel.csv'} and {out / 'design.json'}")
    return EXIT_OK


def cmd_detect(cfg: PipelineConfig) -> int:
    out = _prepare(cfg)
    panel, _ = _ensure_panel(cfg, out)
    h = cfg.resolved_h(panel.n)
    nu = _numeric_or(cfg.nu, "auto")
    report = detect(panel, h, nu=nu, exclusion=cfg.exclusion)
    report.to_json(out / "report.json")
    curve = scan(panel, h)
    curve.to_csv(out / "scan.csv")
    if cfg.plots:
        scan_plot(curve, out / "scan.svg", changepoints=report.indices())
    print(f"detected {report.iota_hat} change point(s) at {report.indices()} (nu = {report.nu:.6g})")
    return EXIT_OK


def _load_report(path) -> ChangePointReport:
    doc = json.loads(Path(path).read_text())
    return ChangePointReport(
        points=tuple((pt["index"], pt["score"]) for pt in doc["points"]),
        iota_hat=doc["iota_hat"], nu=doc["nu"], h=doc["h"],
        peak_sequence=tuple(doc["peak_sequence"]), exclusion=doc["exclusion"],
        grid_start=doc["grid_start"], grid_stop=doc["grid_stop"],
        grid_floor=float("nan") if doc.get("grid_floor") is None else doc["grid_floor"],
    )


def cmd_estimate(cfg: PipelineConfig) -> int:
    out = _prepare(cfg)
    panel, _ = _ensure_panel(cfg, out)
    if cfg.report is not None:
        report = _load_report(cfg.report)
    else:
        report = detect(panel, cfg.resolved_h(panel.n), nu=_numeric_or(cfg.nu, "auto"),
                        exclusion=cfg.exclusion)
        report.to_json(out / "report.json")
    spec = cfg.kernel_spec()
    lam = _numeric_or(cfg.lam, "stability")

    rows = []
    failures = []
    for t in cfg.grid:
        if lam == "stability":
            sel = stability_select_lambda(panel, t, spec, cfg.lambda_grid, seed=cfg.seed)
            lam_t = sel.lambda_value
        else:
            lam_t = lam
        path_t = tv_clime_path(panel, [t], spec, lam_t, report)
        failures.extend(path_t.failures)
        for est in path_t.estimates:
            tag = f"t{est.t:.4f}"
            est.export(out / f"precision_{tag}.csv", out / f"precision_{tag}.json")
            graph = support(est, cfg.u)
            graph.to_edge_csv(out / f"edges_{tag}.csv", weights=est.omega)
            graph.to_adjacency_csv(out / f"adjacency_{tag}.csv")
            rows.append({
                "t": est.t, "lambda": est.lam, "reliable": est.reliable,
                "feasibility_gap": est.feasibility_gap, "u": cfg.u,
                "n_edges": graph.n_edges(),
            })
    summary = {"estimates": rows, "failures": [{"t": t, "error": e} for t, e in failures]}
    (out / "estimate_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"estimated {len(rows)} time point(s), {len(failures)} failure(s)")
    if failures:
        for t, err in failures:
            print(f"numerical failure at t = {t}: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_evaluate(cfg: PipelineConfig) -> int:
    out = _prepare(cfg)
    h = cfg.resolved_h(cfg.n)
    summary, _ = run_table_experiment(
        p=cfg.p, delta0=cfg.delta0, h=h, replications=cfg.replications,
        seed=cfg.seed, n=cfg.n,
    )
    table_rows_json([summary], out / "tables.json")

    design = build_sim_design(cfg.n, cfg.p, cfg.delta0, cfg.seed)
    panel = simulate_panel(design)
    spec = cfg.kernel_spec()
    lam = cfg.lam if isinstance(cfg.lam, float) else 0.06
    truth_level = _numeric_or(cfg.roc_truth, "matching")
    by_t = {}
    all_points = []
    for t in cfg.grid:
        pts = roc_sweep(panel, t, spec, lam, cfg.u_grid, design, truth_level=truth_level)
        by_t[f"{t:g}"] = pts
        all_points.extend(pts)
    roc_points_csv(all_points, out / "roc.csv")
    if cfg.plots:
        roc_plot(by_t, out / "roc.svg")
    print(f"mean count {summary.mean_count:.2f}, mean distance {summary.mean_abs_distance:.2f} "
          f"over {summary.replications} replication(s)")
    return EXIT_OK


def cmd_rates(cfg: PipelineConfig) -> int:
    out = _prepare(cfg)
    params = {"n": cfg.n, "p": cfg.p, "q": 4.0, "A": 1.0, "m_xq": 1.0, "n_x": 1.0}
    params.update(cfg.rates)
    inputs = RateInputs(**params)
    values = {target: rate_calculator(inputs, target) for target in RATE_TARGETS}
    doc = {"inputs": params, "rates": values}
    (out / "rates.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    for target in RATE_TARGETS:
        print(f"{target} = {values[target]:.6g}")
    return EXIT_OK


def cmd_pipeline(cfg: PipelineConfig) -> int:
    for step in (cmd_simulate, cmd_detect, cmd_estimate, cmd_evaluate):
        code = step(cfg)
        if code != EXIT_OK:
            return code
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "estimate": cmd_estimate,
    "evaluate": cmd_evaluate,
    "rates": cmd_rates,
    "pipeline": cmd_pipeline,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _float_list(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tvnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file; flags override its fields")
        sp.add_argument("--input", help="panel CSV (headerless, row i = observation at t_i)")
        sp.add_argument("--report", help="existing change-point report JSON")
        sp.add_argument("--n", type=int)
        sp.add_argument("--p", type=int)
        sp.add_argument("--delta0", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--h", help="scan bandwidth or 'auto' (n^-1/5)")
        sp.add_argument("--nu", help="stopping threshold or 'auto' (ratio rule)")
        sp.add_argument("--exclusion", type=int, help="exclusion radius in indices")
        sp.add_argument("--b", type=float, help="smoothing bandwidth")
        sp.add_argument("--kernel", choices=("uniform", "triangular", "epanechnikov"))
        sp.add_argument("--lambda", dest="lam", help="CLIME penalty or 'stability'")
        sp.add_argument("--u", type=float, help="support threshold")
        sp.add_argument("--grid", type=_float_list, help="comma-separated evaluation times")
        sp.add_argument("--u-grid", dest="u_grid", type=_float_list)
        sp.add_argument("--replications", type=int)
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--no-plots", dest="plots", action="store_false", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        cfg = load_config(config_path, overrides=args)
        cfg.h = _numeric_or(cfg.h, "auto")
        cfg.nu = _numeric_or(cfg.nu, "auto")
        cfg.lam = _numeric_or(cfg.lam, "stability")
        return COMMANDS[command](cfg)
    except NUMERICAL_ERRORS as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, KeyError, json.JSONDecodeError, IndexError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
