"""Command-line front end.

Every command reads a single JSON configuration document; command-line flags
only choose files and verbosity, never physics.  Outputs are deterministic:
identical configs produce byte-identical CSV/JSON, floats are written with 17
significant digits, and optional PNG figures (``--plot``) land next to the
delimited output.

Exit codes: 0 success, 2 configuration problem (bad JSON, bad value, empty
grid, non-quantized field), 3 solver failure (stall / no descent), 4 violated
mathematical property (validation suite).

Thread pinning: ``--threads`` (or the ``LAWDON_THREADS`` environment
variable) sets the usual BLAS/OpenMP environment knobs.  The array-heavy
submodules are imported lazily inside the commands so the pin happens before
numpy first loads.
"""

from __future__ import annotations

import functools
import io
import json
import math
import os
import sys

import click

from . import __version__
from .errors import ConfigError, PropertyError, SolverError
from .limit import (
    LimitParams,
    classify,
    eval_F,
    hc1,
    minimize_F_oracle,
    phase_diagram_sweep,
    project_onto_K_shifted,
    write_sweep_csv,
)
from .metric import AnisotropyMetric, FieldVector

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def _exit_codes(fn):
    """Map the library's exception buckets onto process exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except SolverError as exc:  # includes StallError
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except PropertyError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(4)

    return wrapper


def _pin_threads(threads: int | None) -> None:
    if threads is None:
        raw = os.environ.get("LAWDON_THREADS", "").strip()
        if not raw:
            return
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"LAWDON_THREADS must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"thread count must be >= 1, got {threads}")
    for var in _THREAD_VARS:
        os.environ[var] = str(threads)


def _say(message: str) -> None:
    """Verbose-mode progress note, kept off stdout so data stays clean."""
    ctx = click.get_current_context(silent=True)
    if ctx is not None and (ctx.obj or {}).get("verbose"):
        click.echo(message, err=True)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(version=__version__, prog_name="lawdon")
@click.option("--threads", type=int, default=None, help="Pin BLAS/OpenMP thread count (fallback: LAWDON_THREADS).")
@click.option("--verbose", is_flag=True, help="Progress notes on stderr.")
@click.pass_context
@_exit_codes
def cli(ctx, threads, verbose):
    """Layered-superconductor energetics: projection, onset fields, phase
    diagrams, lattice minimization, trial states, self-checks."""
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    _pin_threads(threads)


# --------------------------------------------------------------------------
# config plumbing


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return doc


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing required key {key!r}")
    return cfg[key]


def _as_float(cfg: dict, key: str) -> float:
    value = _require(cfg, key)
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key!r} must be a number, got {value!r}") from exc
    if not math.isfinite(out):
        raise ConfigError(f"{key!r} must be finite, got {out}")
    return out


def _vector(value, label: str) -> FieldVector:
    try:
        return FieldVector.from_iterable(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{label} must be a list of three numbers, got {value!r}") from exc


def _grid(cfg: dict, list_key: str, grid_key: str) -> list[float]:
    """Sample points from an explicit list or a {start, stop, count} object."""
    if list_key in cfg and grid_key in cfg:
        raise ConfigError(f"give either {list_key!r} or {grid_key!r}, not both")
    if list_key in cfg:
        try:
            values = [float(v) for v in cfg[list_key]]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{list_key!r} must be a list of numbers") from exc
    elif grid_key in cfg:
        window = cfg[grid_key]
        if not isinstance(window, dict):
            raise ConfigError(f"{grid_key!r} must be an object with start/stop/count")
        try:
            start = float(_require(window, "start"))
            stop = float(_require(window, "stop"))
            count = int(_require(window, "count"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad {grid_key!r}: {exc}") from exc
        if count < 0:
            raise ConfigError(f"{grid_key!r} count must be >= 0, got {count}")
        if count == 1:
            values = [start]
        else:
            values = [start + (stop - start) * i / (count - 1) for i in range(count)]
    else:
        raise ConfigError(f"config needs {list_key!r} or {grid_key!r}")
    if not values:
        raise ConfigError(f"{list_key!r} grid is empty")
    return values


def _alpha_metric(cfg: dict) -> tuple[float, AnisotropyMetric]:
    return _as_float(cfg, "alpha"), AnisotropyMetric(lam=_as_float(cfg, "lam"))


def _geometry_from(cfg: dict):
    from .lattice import LatticeGeometry

    g = _require(cfg, "geometry")
    if not isinstance(g, dict):
        raise ConfigError("'geometry' must be a JSON object")
    try:
        return LatticeGeometry(
            N=int(g["N"]),
            M=int(g["M"]),
            Kz=int(g.get("Kz", 1)),
            Lx=float(g.get("Lx", 1.0)),
            Ly=float(g.get("Ly", 1.0)),
            L=float(g.get("L", 1.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"geometry is missing {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad geometry value: {exc}") from exc


def _model_params_from(cfg: dict):
    from .lattice import ModelParams

    p = _require(cfg, "params")
    if not isinstance(p, dict):
        raise ConfigError("'params' must be a JSON object")
    try:
        epsilon = float(p["epsilon"])
        lam = float(p["lam"])
        alpha = float(p["alpha"])
        h_ex = _vector(p["h_ex"], "params.h_ex")
    except KeyError as exc:
        raise ConfigError(f"params is missing {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad params value: {exc}") from exc
    return ModelParams(epsilon=epsilon, lam=lam, alpha=alpha, h_ex=h_ex)


_OPTION_KEYS = ("max_iters", "grad_tol", "step_rule", "step_size", "accel", "seed")


def _options_from(cfg: dict):
    from .minimize import MinimizeOptions

    o = cfg.get("options", {})
    if not isinstance(o, dict):
        raise ConfigError("'options' must be a JSON object")
    unknown = sorted(set(o) - set(_OPTION_KEYS))
    if unknown:
        raise ConfigError(f"unknown options keys: {unknown}")
    return MinimizeOptions(**o)


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        click.echo(text, nl=False)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _json_doc(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _plot_target(output: str | None, plot: bool) -> str | None:
    if not plot:
        return None
    if output is None:
        raise ConfigError("--plot needs --output; the figure is written beside it")
    root, ext = os.path.splitext(output)
    target = root + ".png"
    if target == output:
        raise ConfigError("--output already ends in .png; pick another extension")
    return target


def _render(path: str, draw) -> None:
    try:
        import matplotlib
    except ImportError as exc:
        raise ConfigError(
            "--plot needs matplotlib; install the 'plots' extra (pip install 'lawdon[plots]')"
        ) from exc
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    fig = draw(plt)
    # Software metadata would stamp the matplotlib version; dropping it keeps
    # rerenders byte-stable.
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
    _say(f"figure written to {path}")


# --------------------------------------------------------------------------
# commands


@cli.command("project")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--output", "output_path", default=None, type=click.Path(dir_okay=False), help="JSON result (default: stdout).")
@_exit_codes
def cmd_project(config_path, output_path):
    """Equilibrium internal field for one applied field.

    Config keys: alpha, lam, h_ex (three numbers).  Emits the regime label,
    the projected field, its energy, and the duality-gap certificate.
    """
    cfg = _load_config(config_path)
    alpha, metric = _alpha_metric(cfg)
    h_ex = _vector(_require(cfg, "h_ex"), "h_ex")
    res = classify(LimitParams(alpha=alpha, metric=metric, h_ex=h_ex))
    doc = {
        "alpha": alpha,
        "lam": metric.lam,
        "h_ex": list(h_ex),
        "regime": res.regime,
        "h_star": list(res.h_star),
        "energy": res.energy,
        "duality_gap": res.duality_gap,
    }
    _write_text(output_path, _json_doc(doc))


@cli.command("hc1")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--output", "output_path", default=None, type=click.Path(dir_okay=False), help="CSV table (default: stdout).")
@click.option("--plot", is_flag=True, help="Also render the curve as PNG next to --output.")
@_exit_codes
def cmd_hc1(config_path, output_path, plot):
    """First-onset field magnitude over a grid of tilt angles.

    Config keys: alpha, lam, and either "thetas" (list) or "theta_grid"
    ({start, stop, count}).  CSV columns: theta, hc1.
    """
    cfg = _load_config(config_path)
    alpha, metric = _alpha_metric(cfg)
    thetas = _grid(cfg, "thetas", "theta_grid")
    values = [hc1(theta, alpha, metric) for theta in thetas]
    lines = ["theta,hc1"]
    lines.extend(f"{t:.17g},{v:.17g}" for t, v in zip(thetas, values))
    _write_text(output_path, "\n".join(lines) + "\n")
    _say(f"{len(thetas)} angles, hc1 range [{min(values):.6g}, {max(values):.6g}]")

    target = _plot_target(output_path, plot)
    if target:
        def draw(plt):
            fig, ax = plt.subplots(figsize=(5.0, 3.4))
            ax.plot(thetas, values, "o-", ms=3, lw=1.2)
            ax.set_xlabel("tilt angle")
            ax.set_ylabel("onset field")
            ax.set_title(f"alpha={alpha:g}, lam={metric.lam:g}")
            fig.tight_layout()
            return fig

        _render(target, draw)


@cli.command("phase-diagram")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--output", "output_path", default=None, type=click.Path(dir_okay=False), help="CSV table (default: stdout).")
@click.option("--plot", is_flag=True, help="Also render the regime map as PNG next to --output.")
@_exit_codes
def cmd_phase_diagram(config_path, output_path, plot):
    """Regime classification on a (tilt angle) x (field magnitude) grid.

    Config keys: alpha, lam, "thetas" or "theta_grid", "magnitudes" or
    "magnitude_grid".  The applied direction is (cos theta, 0, sin theta).
    """
    cfg = _load_config(config_path)
    alpha, metric = _alpha_metric(cfg)
    thetas = _grid(cfg, "thetas", "theta_grid")
    magnitudes = _grid(cfg, "magnitudes", "magnitude_grid")
    rows = phase_diagram_sweep(alpha, metric, thetas, magnitudes)
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    _write_text(output_path, buf.getvalue())
    _say(f"{len(rows)} grid points classified")

    target = _plot_target(output_path, plot)
    if target:
        def draw(plt):
            fig, ax = plt.subplots(figsize=(5.2, 4.0))
            colors = {"Meissner": "#4477aa", "LockIn": "#ee6677", "Tilted": "#228833"}
            for regime, color in colors.items():
                pts = [(r.theta, r.magnitude) for r in rows if r.regime == regime]
                if pts:
                    ax.scatter(*zip(*pts), s=9, c=color, label=regime, linewidths=0)
            ax.set_xlabel("tilt angle")
            ax.set_ylabel("field magnitude")
            ax.set_title(f"alpha={alpha:g}, lam={metric.lam:g}")
            ax.legend(loc="best", fontsize=8)
            fig.tight_layout()
            return fig

        _render(target, draw)


@cli.command("ld-min")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--output", "output_path", default=None, type=click.Path(dir_okay=False), help="JSON report (default: stdout).")
@click.option("--state", "state_path", default=None, type=click.Path(dir_okay=False), help="Write the final lattice state here (binary).")
@click.option("--plot", is_flag=True, help="Render the energy/gradient trace as PNG next to --output.")
@_exit_codes
def cmd_ld_min(config_path, output_path, state_path, plot):
    """Gradient-descent minimization of the layered lattice energy.

    Config keys: geometry {N, M, Kz, Lx, Ly, L}, params {epsilon, lam,
    alpha, h_ex}, optional options {max_iters, grad_tol, step_rule,
    step_size, accel, seed}, and the flux sector as either "flux_quanta"
    [q1, q2, q3] or an explicit "h_bar" (which must be flux-quantized).
    "initial_state" warm-starts from a saved state file; "sectors" runs an
    outer search over several integer sectors instead.
    """
    cfg = _load_config(config_path)
    import numpy as np

    from . import lattice
    from .minimize import minimize, outer_flux_search

    geometry = _geometry_from(cfg)
    params = _model_params_from(cfg)
    options = _options_from(cfg)

    warm = None
    if "initial_state" in cfg:
        if "sectors" in cfg:
            raise ConfigError("'initial_state' applies to single-sector runs, not 'sectors'")
        warm, _ = lattice.load_state(str(cfg["initial_state"]))
        if warm.geometry != geometry:
            raise ConfigError("initial state was saved on a different grid than 'geometry'")

    if "flux_quanta" in cfg and "h_bar" in cfg:
        raise ConfigError("give either 'flux_quanta' or 'h_bar', not both")
    if "flux_quanta" in cfg:
        quanta = _require(cfg, "flux_quanta")
        try:
            q1, q2, q3 = (int(v) for v in quanta)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"'flux_quanta' must be three integers, got {quanta!r}") from exc
        h_bar = lattice.flux_quantum_field(geometry, q1, q2, q3)
    elif "h_bar" in cfg:
        h_bar = np.asarray([float(v) for v in _require(cfg, "h_bar")], dtype=float)
        if h_bar.shape != (3,):
            raise ConfigError("'h_bar' must have three components")
        lattice.assert_flux_quantized(geometry, h_bar)
    elif warm is not None:
        h_bar = warm.h_bar
    else:
        h_bar = lattice.flux_quantum_field(geometry)
    if warm is not None and not np.allclose(warm.h_bar, h_bar, rtol=0.0, atol=1e-12):
        raise ConfigError("initial state carries a different average field than requested")

    doc: dict = {}
    if "sectors" in cfg:
        sectors = _require(cfg, "sectors")
        if not isinstance(sectors, list) or not sectors:
            raise ConfigError("'sectors' must be a non-empty list of sectors")
        _say(f"outer search over {len(sectors)} flux sectors")
        result = outer_flux_search(geometry, params, options, flux_range=sectors)
        report = result.best
        doc["flux_search"] = {
            "best_sector": list(result.best_sector),
            "sectors": {
                ",".join(str(q) for q in sec): {
                    "energy": rep.breakdown.total,
                    "converged": rep.converged,
                    "iterations": rep.iterations,
                }
                for sec, rep in sorted(result.reports.items())
            },
        }
    else:
        report = minimize(geometry, params, options, h_bar=h_bar, initial_state=warm)

    state = report.state
    bd = report.breakdown
    moduli = np.abs(state.u)
    doc.update(
        {
            "converged": report.converged,
            "iterations": report.iterations,
            "stop_reason": report.stop_reason,
            "final_grad_norm": report.grad_norms[-1] if report.grad_norms else None,
            "energy": {
                "total": bd.total,
                "dirichlet": bd.dirichlet,
                "quartic": bd.quartic,
                "josephson": bd.josephson,
                "magnetic": bd.magnetic,
            },
            "h_bar": [float(v) for v in state.h_bar],
            "plane_flux": [lattice.plane_flux(state, n) for n in range(geometry.N)],
            "min_modulus": float(moduli.min()),
            "max_modulus": float(moduli.max()),
        }
    )
    if state_path is not None:
        lattice.save_state(state_path, state, params)
        doc["state_file"] = os.path.basename(state_path)
        _say(f"state written to {state_path}")
    _write_text(output_path, _json_doc(doc))

    target = _plot_target(output_path, plot)
    if target:
        energies = list(report.energies)
        grads = list(report.grad_norms)

        def draw(plt):
            fig, ax = plt.subplots(figsize=(5.2, 3.4))
            floor = min(energies)
            gaps = [e - floor for e in energies]
            positive = [g for g in gaps if g > 0]
            if positive:
                ax.semilogy(range(len(gaps)), [max(g, min(positive) * 1e-3) for g in gaps], lw=1.0, label="energy - best")
            ax2 = ax.twinx()
            if any(g > 0 for g in grads):
                ax2.semilogy(range(len(grads)), grads, lw=1.0, color="#ee6677", label="|grad|")
            ax.set_xlabel("iteration")
            ax.set_ylabel("energy gap")
            ax2.set_ylabel("gradient norm")
            fig.tight_layout()
            return fig

        _render(target, draw)


@cli.command("trial")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--output", "output_path", default=None, type=click.Path(dir_okay=False), help="JSON report (default: stdout).")
@click.option("--state", "state_path", default=None, type=click.Path(dir_okay=False), help="Write the assembled lattice state here (binary).")
@_exit_codes
def cmd_trial(config_path, output_path, state_path):
    """Assemble the vortex-lattice competitor state for a target field.

    Config keys: geometry, params (as for ld-min), "target_h" (three
    numbers, the macroscopic target field), optional
    "include_core_profile" (default true).  The report carries the flux
    sector, per-plane vortex counts, the seam residual, the offset scan,
    and the normalized-energy comparison against the closed-form value.
    """
    cfg = _load_config(config_path)
    from . import lattice
    from .trial import build_trial, evaluate_against_bound

    geometry = _geometry_from(cfg)
    params = _model_params_from(cfg)
    target = _vector(_require(cfg, "target_h"), "target_h")
    include_profile = bool(cfg.get("include_core_profile", True))

    result = build_trial(geometry, params, target, include_core_profile=include_profile)
    comparison = evaluate_against_bound(result.state, params, result.recipe)
    bd = lattice.ld_energy(result.state, params)
    rep = result.report
    doc = {
        "quanta": list(rep.quanta),
        "h_bar": list(rep.h_bar),
        "plane_counts": list(rep.plane_counts),
        "min_center_distance": rep.min_center_distance,
        "seam_residual": rep.seam_residual,
        "offsets": list(rep.offsets),
        "offset_energies": list(rep.offset_energies),
        "n_matrix": [list(row) for row in rep.n_matrix],
        "energy": {
            "total": bd.total,
            "dirichlet": bd.dirichlet,
            "quartic": bd.quartic,
            "josephson": bd.josephson,
            "magnetic": bd.magnetic,
        },
        "bound": {
            "normalized_energy": comparison.normalized_energy,
            "bound": comparison.bound,
            "ratio": comparison.ratio,
            "normalized_h_ex": list(comparison.normalized_h_ex),
        },
        "recipe": result.recipe.to_json_dict(),
    }
    if state_path is not None:
        lattice.save_state(state_path, result.state, params)
        doc["state_file"] = os.path.basename(state_path)
        _say(f"state written to {state_path}")
    _write_text(output_path, _json_doc(doc))


# --------------------------------------------------------------------------
# validation suite


def _validate_suite(seed: int, instances: int) -> list[dict]:
    """Run the cross-module consistency checks; returns one record per check."""
    import numpy as np

    from .interp import check_zderiv_identity
    from .lattice import (
        LatticeGeometry,
        LatticeState,
        ModelParams,
        flux_quantum_field,
        gauge_transform,
        ld_energy,
        plane_flux,
    )
    from .minimize import MinimizeOptions, minimize, random_initial_state

    checks: list[dict] = []

    def record(name: str, worst: float, tol: float) -> None:
        checks.append({"name": name, "worst": worst, "tolerance": tol, "passed": bool(worst <= tol)})

    # 1+2: projection vs derivative-free oracle, and the duality-gap certificate.
    rng = np.random.default_rng(seed)
    worst_mismatch = 0.0
    worst_gap = 0.0
    for _ in range(instances):
        lam = rng.uniform(0.2, 5.0)
        alpha = rng.uniform(0.05, 0.95)
        direction = rng.normal(size=3)
        direction /= max(float(np.linalg.norm(direction)), 1e-12)
        h_ex = FieldVector(*(rng.uniform(0.0, 10.0) * direction))
        params = LimitParams(alpha=alpha, metric=AnisotropyMetric(lam=lam), h_ex=h_ex)
        star = project_onto_K_shifted(params)
        ref, _ = minimize_F_oracle(params)
        worst_mismatch = max(worst_mismatch, (star - ref).norm())
        gap = eval_F(star, params) + 0.5 * star.dot(star) - 0.5 * h_ex.dot(h_ex)
        worst_gap = max(worst_gap, abs(gap))
    record("oracle equivalence", worst_mismatch, 1e-6)
    record("duality gap", worst_gap, 1e-8)

    # 3: lattice energy is exactly gauge invariant.
    geometry = LatticeGeometry(N=3, M=10, Kz=2, Lx=1.0, Ly=1.0, L=0.9)
    params = ModelParams(epsilon=0.05, lam=1.2, alpha=0.5, h_ex=FieldVector(0.3, 0.0, 2.0 * math.pi))
    h_bar = flux_quantum_field(geometry, 0, 0, 1)
    worst_rel = 0.0
    for k in range(5):
        state = random_initial_state(geometry, h_bar, seed=seed + k)
        a0 = 0.3 * rng.normal(size=(3, geometry.nz, geometry.M, geometry.M))
        state = LatticeState(state.u, a0, state.h_bar, geometry)
        before = ld_energy(state, params).total
        gamma = rng.uniform(-math.pi, math.pi, size=(geometry.nz, geometry.M, geometry.M))
        after = ld_energy(gauge_transform(state, gamma), params).total
        worst_rel = max(worst_rel, abs(after - before) / (1.0 + abs(before)))
    record("gauge invariance", worst_rel, 1e-10)

    # 4: vertical-difference identity of the interpolated field.
    worst_res = 0.0
    zgeom = LatticeGeometry(N=3, M=8, Kz=3, Lx=1.0, Ly=1.0, L=0.9)
    for k in range(5):
        state = random_initial_state(zgeom, flux_quantum_field(zgeom, 0, 0, 1), seed=seed + 10 + k)
        scale = float(np.max(np.abs(state.u))) ** 2 / zgeom.s**2
        worst_res = max(worst_res, check_zderiv_identity(state) / (1.0 + scale))
    record("zderiv identity", worst_res, 1e-12)

    # 5: plane fluxes of a minimized state are a single shared integer.
    mgeom = LatticeGeometry(N=3, M=12, Kz=1, Lx=1.0, Ly=1.0, L=0.75)
    mparams = ModelParams(epsilon=0.1, lam=1.0, alpha=0.5, h_ex=FieldVector(0.0, 0.0, 2.0 * math.pi))
    opts = MinimizeOptions(max_iters=4000, grad_tol=1e-5, accel="cg", seed=seed)
    rep = minimize(mgeom, mparams, opts, h_bar=flux_quantum_field(mgeom, 0, 0, 1))
    fluxes = [plane_flux(rep.state, n) for n in range(mgeom.N)]
    off_integer = max(abs(f - round(f)) for f in fluxes)
    spread = max(fluxes) - min(fluxes)
    record("flux equality", max(off_integer, spread), 1e-8)

    return checks


@cli.command("validate")
@click.option("--config", "config_path", default=None, type=click.Path(dir_okay=False), help="Optional JSON: {seed, instances}.")
@click.option("--output", "output_path", default=None, type=click.Path(dir_okay=False), help="JSON report of all checks.")
@_exit_codes
def cmd_validate(config_path, output_path):
    """Cross-module consistency suite; exits 4 if any check fails.

    Checks: projection vs derivative-free oracle, duality-gap certificate,
    gauge invariance of the lattice energy, the vertical-difference identity
    of the interpolated field, and integer plane-flux equality on a
    minimized state.
    """
    cfg = _load_config(config_path) if config_path else {}
    seed = int(cfg.get("seed", 0))
    instances = int(cfg.get("instances", 200))
    if instances < 1:
        raise ConfigError(f"'instances' must be >= 1, got {instances}")

    checks = _validate_suite(seed, instances)
    for check in checks:
        status = "PASS" if check["passed"] else "FAIL"
        click.echo(
            f"[{check['name']}] {status}  worst={check['worst']:.3e}  tol={check['tolerance']:g}"
        )
    doc = {
        "seed": seed,
        "instances": instances,
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks),
    }
    if output_path is not None:
        _write_text(output_path, _json_doc(doc))
    if not doc["all_passed"]:
        failed = ", ".join(c["name"] for c in checks if not c["passed"])
        raise PropertyError(f"validation failed: {failed}")


main = cli

if __name__ == "__main__":
    main()
