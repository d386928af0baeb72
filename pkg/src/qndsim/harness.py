"""Command-line harness: figure-style data products with provenance manifests.

Subcommands map onto the standard plots for this protocol: ``kappa`` reports
the derived coupling for a parameter sheet, ``joint`` writes the two-pulse
scatter panels, ``sweep`` the variance-vs-coupling tables, ``conditional``
the conditioned-variance tables.  Data files are CSV, summaries JSON; theory
companions are closed-form only and identical across seeds.  Every emitted
file is listed in exactly one manifest together with its content hash, the
resolved spec, and the seed, so a run can be reproduced byte for byte.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 statistical check
failure (with --check).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import stats
from .montecarlo import (
    SequenceConfig,
    run_kappa_sweep,
    run_sequence,
    sweep_seed,
)
from .physics import (
    SheetError,
    coupling_strength,
    derive_coupling,
    kappa_from_angle,
    load_sheet,
)

DEFAULT_KAPPA_GRID = (0.0, 0.15, 0.3, 0.45, 0.62)
THEORY_POINTS = 121
CHECK_SIGMAS = 3.0


class SpecError(ValueError):
    """Experiment spec failed to parse or is inconsistent."""


class CheckFailure(Exception):
    """One or more sweep points fell outside the statistical acceptance band."""


@dataclass(frozen=True)
class ExperimentSpec:
    """A named, fully resolved experiment: sequence settings plus a kappa grid."""

    name: str
    sequence: SequenceConfig
    physics_sheet: str | None = None
    kappa_grid: tuple[float, ...] | None = None
    photon_grid: tuple[float, ...] | None = None
    outputs: str = "out"

    def __post_init__(self):
        if not self.name:
            raise SpecError("spec name must be non-empty")
        if self.kappa_grid is not None and self.photon_grid is not None:
            raise SpecError("kappa_grid and photon_grid are mutually exclusive")
        if self.photon_grid is not None and not self.physics_sheet:
            raise SpecError("photon_grid requires a physics_sheet")


def spec_from_mapping(raw: dict, source: str = "<spec>") -> ExperimentSpec:
    if not isinstance(raw, dict):
        raise SpecError(f"{source}: expected a JSON object")
    known = {"name", "physics_sheet", "sequence", "kappa_grid", "photon_grid", "outputs"}
    unknown = set(raw) - known
    if unknown:
        raise SpecError(f"{source}: unknown key(s) {sorted(unknown)}")
    seq_raw = raw.get("sequence")
    if not isinstance(seq_raw, dict):
        raise SpecError(f"{source}: 'sequence' must be an object")
    allowed = {f.name for f in fields(SequenceConfig)}
    bad = set(seq_raw) - allowed
    if bad:
        raise SpecError(f"{source}: unknown sequence key(s) {sorted(bad)}")
    try:
        sequence = SequenceConfig(**seq_raw)
        return ExperimentSpec(
            name=str(raw.get("name", "")),
            physics_sheet=raw.get("physics_sheet"),
            sequence=sequence,
            kappa_grid=tuple(raw["kappa_grid"]) if raw.get("kappa_grid") is not None else None,
            photon_grid=tuple(raw["photon_grid"]) if raw.get("photon_grid") is not None else None,
            outputs=str(raw.get("outputs", "out")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"{source}: {exc}") from exc


def load_spec(
    path: str | Path,
    seed: int | None = None,
    shots: int | None = None,
    out: str | None = None,
) -> ExperimentSpec:
    """Load a spec file and apply command-line overrides."""
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    spec = spec_from_mapping(raw, source=str(path))
    seq = spec.sequence
    if seed is not None:
        seq = replace(seq, seed=seed)
    if shots is not None:
        seq = replace(seq, shots=shots)
    spec = replace(spec, sequence=seq)
    if out is not None:
        spec = replace(spec, outputs=out)
    return spec


def resolve_kappa_grid(spec: ExperimentSpec) -> list[float]:
    """The sweep abscissa: explicit kappas, or couplings from a photon grid."""
    if spec.kappa_grid is not None:
        if not spec.kappa_grid:
            raise SpecError("kappa_grid must be non-empty")
        return list(spec.kappa_grid)
    if spec.photon_grid is not None:
        if not spec.photon_grid:
            raise SpecError("photon_grid must be non-empty")
        sheet = load_sheet(spec.physics_sheet)
        return [
            coupling_strength(sheet.atomic, replace(sheet.pulse, photons=p))
            for p in spec.photon_grid
        ]
    return list(DEFAULT_KAPPA_GRID)


@dataclass(frozen=True)
class FigureBundle:
    """Paths of one figure's data and theory files plus its manifest."""

    figure_id: str
    data_files: tuple[str, ...]
    theory_files: tuple[str, ...]
    manifest: dict

    def __post_init__(self):
        for path in self.data_files + self.theory_files:
            _assert_parses(Path(path))


def _assert_parses(path: Path) -> None:
    if not path.is_file():
        raise FileNotFoundError(path)
    text = path.read_text()
    if path.suffix == ".json":
        json.loads(text)
    else:
        lines = text.splitlines()
        width = len(lines[0].split(","))
        for line in lines[1:]:
            if len(line.split(",")) != width:
                raise ValueError(f"{path}: ragged CSV row {line!r}")


def _fmt(x) -> str:
    return f"{x:.9g}"


def _round9(x: float) -> float:
    return float(_fmt(x))


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _json_ready(obj):
    if isinstance(obj, float):
        return _round9(obj)
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    return obj


def _emit_manifest(
    outdir: Path, spec: ExperimentSpec, figure_id: str, files: list[Path]
) -> dict:
    # the embedded spec is kept at full float precision: feeding it back into
    # spec_from_mapping must reproduce the data files byte for byte
    manifest = {
        "name": spec.name,
        "figure": figure_id,
        "seed": spec.sequence.seed,
        "spec": asdict(spec),
        "files": {p.name: _sha256(p) for p in files},
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    _write_text(
        outdir / f"{spec.name}_{figure_id}_manifest.json",
        json.dumps(manifest, indent=1, sort_keys=True) + "\n",
    )
    return manifest


def _outdir(spec: ExperimentSpec) -> Path:
    path = Path(spec.outputs)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_kappa(sheet_path: str, photons: float | None = None, as_json: bool = False,
              stream=None) -> dict:
    """Report kappa, phi, epsilon for a sheet, with the phi cross-check."""
    stream = stream if stream is not None else sys.stdout
    sheet = load_sheet(sheet_path)
    pulse = sheet.pulse if photons is None else replace(sheet.pulse, photons=photons)
    coupling = derive_coupling(sheet.atomic, pulse)
    if pulse.photons > 0:
        recovered = kappa_from_angle(
            coupling.phi, pulse.stokes_length, sheet.atomic.collective_spin
        )
    else:
        recovered = 0.0
    report = {
        "sheet": sheet.name,
        "photons": pulse.photons,
        "kappa": coupling.kappa,
        "phi_rad": coupling.phi,
        "epsilon": coupling.epsilon,
        "kappa_from_phi": recovered,
        "phi_consistency_abs": abs(coupling.kappa - recovered),
    }
    if as_json:
        print(json.dumps(_json_ready(report), indent=1), file=stream)
    else:
        print(f"sheet    {report['sheet']}  (photons = {_fmt(report['photons'])})", file=stream)
        print(f"kappa    {_fmt(report['kappa'])}", file=stream)
        print(f"phi      {_fmt(report['phi_rad'])} rad", file=stream)
        print(f"epsilon  {_fmt(report['epsilon'])}", file=stream)
        print(
            f"check    kappa from phi = {_fmt(report['kappa_from_phi'])} "
            f"(|diff| = {_fmt(report['phi_consistency_abs'])})",
            file=stream,
        )
    return report


def cmd_joint(spec: ExperimentSpec, workers: int = 1) -> FigureBundle:
    """Scatter panels: (a) no atoms, (b) coupled y basis, (c) z basis."""
    outdir = _outdir(spec)
    seq = spec.sequence
    panels = {
        "a": replace(seq, kappa_nominal=0.0, basis="y", seed=sweep_seed(seq.seed, 0)),
        "b": replace(seq, basis="y", seed=sweep_seed(seq.seed, 1)),
        "c": replace(seq, basis="z", seed=sweep_seed(seq.seed, 2)),
    }
    data_files = []
    summary = {"config": asdict(seq), "panels": {}}
    for panel, cfg in panels.items():
        result = run_sequence(cfg, workers=workers)
        path = outdir / f"{spec.name}_joint_{panel}.csv"
        _write_csv(path, "s1,s2", zip(result.s1.tolist(), result.s2.tolist()))
        data_files.append(path)
        vs = stats.variances(result)
        summary["panels"][panel] = {
            "kappa": cfg.kappa_nominal,
            "basis": cfg.basis,
            "seed": cfg.seed,
            "pearson_r": float(np.corrcoef(result.s1, result.s2)[0, 1]),
            **vs.to_dict(),
        }
    summary_path = outdir / f"{spec.name}_joint_summary.json"
    _write_text(summary_path, json.dumps(_json_ready(summary), indent=1) + "\n")
    data_files.append(summary_path)
    manifest = _emit_manifest(outdir, spec, "joint_y", data_files)
    return FigureBundle(
        figure_id="joint_y",
        data_files=tuple(str(p) for p in data_files),
        theory_files=(),
        manifest=manifest,
    )


def _individual_curve(kappa: float) -> float:
    return (1.0 + kappa * kappa) / 2.0


def _plus_curve(kappa: float) -> float:
    return (1.0 + 2.0 * kappa * kappa) / 2.0


def cmd_variance_sweep(
    spec: ExperimentSpec,
    mode: str | None = None,
    check: bool = False,
    workers: int = 1,
) -> FigureBundle:
    """Variance-vs-kappa tables for the correlated and re-initialized protocols."""
    outdir = _outdir(spec)
    grid = resolve_kappa_grid(spec)
    modes = [mode] if mode else ["qnd", "reinit"]
    data_files = []
    failures = []
    for m in modes:
        results = run_kappa_sweep(replace(spec.sequence, mode=m), grid, workers=workers)
        rows = []
        for kappa, result in zip(grid, results):
            vs = stats.variances(result)
            rows.append(
                (
                    kappa,
                    vs.sigma1,
                    vs.sigma2,
                    vs.sigma_plus,
                    vs.sigma_minus,
                    vs.se_sigma1,
                    vs.se_sigma2,
                    vs.se_plus,
                    vs.se_minus,
                )
            )
            if check:
                if m == "qnd":
                    targets = {
                        "sigma1": (vs.sigma1, vs.se_sigma1, _individual_curve(kappa)),
                        "sigma2": (vs.sigma2, vs.se_sigma2, _individual_curve(kappa)),
                        "sigma_plus": (vs.sigma_plus, vs.se_plus, _plus_curve(kappa)),
                        "sigma_minus": (vs.sigma_minus, vs.se_minus, 0.5),
                    }
                else:
                    targets = {
                        name: (value, se, _individual_curve(kappa))
                        for name, value, se in (
                            ("sigma1", vs.sigma1, vs.se_sigma1),
                            ("sigma2", vs.sigma2, vs.se_sigma2),
                            ("sigma_plus", vs.sigma_plus, vs.se_plus),
                            ("sigma_minus", vs.sigma_minus, vs.se_minus),
                        )
                    }
                for name, (value, se, target) in targets.items():
                    if abs(value - target) > CHECK_SIGMAS * se:
                        failures.append(
                            f"{m} kappa={kappa:g}: {name}={value:.4f} vs "
                            f"{target:.4f} exceeds {CHECK_SIGMAS:g} SE ({se:.4f})"
                        )
        path = outdir / f"{spec.name}_variance_{m}.csv"
        _write_csv(
            path,
            "kappa,sigma1,sigma2,sigma_plus,sigma_minus,"
            "se_sigma1,se_sigma2,se_plus,se_minus",
            rows,
        )
        data_files.append(path)
    hi = max(grid) or 1.0
    theory_path = outdir / f"{spec.name}_variance_theory.csv"
    _write_csv(
        theory_path,
        "kappa,individual,plus,minus",
        (
            (k, _individual_curve(k), _plus_curve(k), 0.5)
            for k in np.linspace(0.0, hi, THEORY_POINTS)
        ),
    )
    manifest = _emit_manifest(outdir, spec, "variance_sweep", data_files + [theory_path])
    if failures:
        raise CheckFailure("; ".join(failures))
    return FigureBundle(
        figure_id="variance_sweep",
        data_files=tuple(str(p) for p in data_files),
        theory_files=(str(theory_path),),
        manifest=manifest,
    )


def cmd_conditional_sweep(
    spec: ExperimentSpec, check: bool = False, workers: int = 1
) -> FigureBundle:
    """Conditioned-variance (and squeezing) table over the kappa grid."""
    outdir = _outdir(spec)
    grid = resolve_kappa_grid(spec)
    results = run_kappa_sweep(spec.sequence, grid, workers=workers)
    rows = []
    failures = []
    for kappa, result in zip(grid, results):
        vs = stats.variances(result)
        cond = stats.binned_conditional(result)
        rows.append(
            (
                kappa,
                vs.sigma2 - 0.5,
                cond.sigma_cond - 0.5,
                cond.squeezing_db,
                vs.se_sigma2,
                cond.se_cond,
            )
        )
        if check:
            total_target = kappa * kappa / 2.0
            cond_target = stats.exact_conditional(kappa) - 0.5
            if abs((vs.sigma2 - 0.5) - total_target) > CHECK_SIGMAS * vs.se_sigma2:
                failures.append(
                    f"kappa={kappa:g}: sigma2 excess {vs.sigma2 - 0.5:.4f} vs "
                    f"{total_target:.4f} exceeds {CHECK_SIGMAS:g} SE"
                )
            if abs((cond.sigma_cond - 0.5) - cond_target) > CHECK_SIGMAS * cond.se_cond:
                failures.append(
                    f"kappa={kappa:g}: conditional excess {cond.sigma_cond - 0.5:.4f} "
                    f"vs {cond_target:.4f} exceeds {CHECK_SIGMAS:g} SE"
                )
    data_path = outdir / f"{spec.name}_conditional.csv"
    _write_csv(
        data_path,
        "kappa,sigma2_minus_half,sigma_cond_minus_half,squeezing_db,se_sigma2,se_cond",
        rows,
    )
    hi = max(grid) or 1.0
    theory_path = outdir / f"{spec.name}_conditional_theory.csv"
    _write_csv(
        theory_path,
        "kappa,total_excess,conditional_excess,squeezing_db_ideal",
        (
            (
                k,
                k * k / 2.0,
                stats.exact_conditional(k) - 0.5,
                10.0 * math.log10(1.0 + k * k) if k else math.nan,
            )
            for k in np.linspace(0.0, hi, THEORY_POINTS)
        ),
    )
    manifest = _emit_manifest(outdir, spec, "conditional_sweep", [data_path, theory_path])
    if failures:
        raise CheckFailure("; ".join(failures))
    return FigureBundle(
        figure_id="conditional_sweep",
        data_files=(str(data_path),),
        theory_files=(str(theory_path),),
        manifest=manifest,
    )


# ---------------------------------------------------------------------------
# CLI plumbing
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--spec", required=True, help="experiment spec (JSON)")
    sub.add_argument("--seed", type=int, default=None, help="override the spec seed")
    sub.add_argument("--shots", type=int, default=None, help="override shots per run")
    sub.add_argument("--out", default=None, help="override the output directory")
    sub.add_argument("--workers", type=int, default=1, help="concurrent shot chunks")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnd",
        description="Two-pulse collective-spin probe: simulator and figure harness.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    kap = subs.add_parser("kappa", help="derived coupling for a parameter sheet")
    kap.add_argument("--sheet", required=True, help="parameter sheet (JSON path or bundled name)")
    kap.add_argument("--photons", type=float, default=None, help="override photon number")
    kap.add_argument("--json", action="store_true", help="emit the report as JSON")

    joint = subs.add_parser("joint", help="two-pulse joint-distribution panels")
    _add_common(joint)

    sweep = subs.add_parser("sweep", help="variance sweep over the kappa grid")
    _add_common(sweep)
    sweep.add_argument("--mode", choices=["qnd", "reinit"], default=None)
    sweep.add_argument("--check", action="store_true", help="fail if points leave the 3-SE band")

    cond = subs.add_parser("conditional", help="conditioned-variance sweep")
    _add_common(cond)
    cond.add_argument("--check", action="store_true", help="fail if points leave the 3-SE band")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "kappa":
            cmd_kappa(args.sheet, photons=args.photons, as_json=args.json)
            return 0
        spec = load_spec(args.spec, seed=args.seed, shots=args.shots, out=args.out)
        if args.command == "joint":
            cmd_joint(spec, workers=args.workers)
        elif args.command == "sweep":
            cmd_variance_sweep(spec, mode=args.mode, check=args.check, workers=args.workers)
        elif args.command == "conditional":
            cmd_conditional_sweep(spec, check=args.check, workers=args.workers)
        return 0
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 4
    except (SpecError, SheetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
