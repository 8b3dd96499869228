"""Command-line interface.

Every subcommand resolves its parameters from built-in defaults, then an
optional JSON ``--config`` file (keys are flag names with underscores), then
explicit flags.  The effective configuration is echoed as the first output
line and embedded in every file written.

Exit codes: 0 success, 1 a numerical check failed, 2 a precondition was
violated, 3 honest classification failure, 64 usage error.
"""

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PRECONDITION = 2
EXIT_CLASSIFICATION = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


DEFAULTS = {
    "spectrum": {"gamma_max": 14.0, "out": None},
    "stability": {"gamma_cutoff": 12.0},
    "model": {"id": "L1", "R": 8.0, "n_rho": 200, "n_angle": 32, "out": None},
    "fiber": {"c": None, "T": 4.0, "n_t": 128, "n_angle": 32, "out": None},
    "energy": {"target": "L1", "sigma": 1.0, "rho": 8.0, "n_rho": 400, "n_angle": 16},
    "monotonicity": {"target": "L1", "sigma": 0.5, "rho": 8.0, "n_rho": 400, "n_angle": 64, "tol": None, "out": None},
    "decay": {"target": "L1", "annulus": "4,16", "shells": 9, "n_theta": 32, "out": None},
    "recenter": {"target": "L1", "b": "0,0,0,0,0,0", "annulus": "8,16", "shells": 6, "n_theta": 32},
    "bubble-scan": {"input": None, "rho": 0.5, "eps": "auto", "out": None},
    "classify": {"input": None, "out": None},
    "selfcheck": {"seed": 0},
}


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def validate(self):
        for key, val in self.params.items():
            if val is None or isinstance(val, str):
                continue
            if key in ("tol", "eps", "rho", "R", "T", "gamma_max", "gamma_cutoff") and val <= 0:
                raise ValueError(f"{key} must be positive")
            if key.startswith("n_") or key == "shells":
                if int(val) < 2:
                    raise ValueError(f"{key} must be at least 2")

    def echo(self):
        return json.dumps(asdict(self), sort_keys=True)


def _floats(text, n=None, name="value"):
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise ValueError(f"{name} must be a comma-separated list of numbers") from None
    if n is not None and len(vals) != n:
        raise ValueError(f"{name} needs {n} components")
    return np.array(vals)


def build_parser():
    p = _Parser(prog="slcone", description="Special Lagrangian cone toolkit")
    p.add_argument("--config", help="JSON file of default parameters")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_text, args):
        sp = sub.add_parser(name, help=help_text)
        for flag, kw in args:
            sp.add_argument(flag, default=None, **kw)
        return sp

    add("spectrum", "link eigenvalues and indicial roots", [
        ("--gamma-max", {"type": float}), ("--out", {})])
    add("stability", "certify the spectral gap", [("--gamma-cutoff", {"type": float})])
    add("model", "sample a local model", [
        ("--id", {"choices": ["Cone", "L1", "L2", "L3"]}), ("--R", {"type": float}),
        ("--n-rho", {"type": int}), ("--n-angle", {"type": int}), ("--out", {})])
    add("fiber", "classify and sample a fiber", [
        ("--c", {}), ("--T", {"type": float}), ("--n-t", {"type": int}),
        ("--n-angle", {"type": int}), ("--out", {})])
    add("energy", "annulus energy", [
        ("--target", {}), ("--sigma", {"type": float}), ("--rho", {"type": float}),
        ("--n-rho", {"type": int}), ("--n-angle", {"type": int})])
    add("monotonicity", "monotonicity residual", [
        ("--target", {}), ("--sigma", {"type": float}), ("--rho", {"type": float}),
        ("--n-rho", {"type": int}), ("--n-angle", {"type": int}), ("--tol", {"type": float}),
        ("--out", {})])
    add("decay", "decay rates of a graph over the cone", [
        ("--target", {}), ("--annulus", {}), ("--shells", {"type": int}),
        ("--n-theta", {"type": int}), ("--out", {})])
    add("recenter", "estimate the translation of a target", [
        ("--target", {}), ("--b", {}), ("--annulus", {}), ("--shells", {"type": int}),
        ("--n-theta", {"type": int})])
    add("bubble-scan", "bubble scale, center and classification", [
        ("--input", {}), ("--rho", {"type": float}), ("--eps", {}), ("--out", {})])
    add("classify", "match samples against s L + b", [("--input", {}), ("--out", {})])
    add("selfcheck", "run the invariant suite", [("--seed", {"type": int})])
    return p


def resolve_config(args):
    params = dict(DEFAULTS[args.command])
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        section = file_cfg.get(args.command, file_cfg)
        for key, val in section.items():
            key = key.replace("-", "_")
            if key in params:
                params[key] = val
    for key in params:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    seed = int(params.pop("seed", 0) or 0)
    cfg = RunConfig(args.command, params, seed)
    cfg.validate()
    return cfg


def _load_target(name, sampler):
    from .local_models import ModelId
    from .varifold import read_jsonl

    if name in {m.value for m in ModelId}:
        return sampler(name)
    return read_jsonl(name)


def _emit_json(obj, path, cfg):
    obj = dict(obj)
    obj["config"] = asdict(cfg)
    text = json.dumps(obj, indent=2, sort_keys=True, default=float)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_spectrum(cfg):
    from .spectral import link_spectrum, spectrum_rows_csv

    P = cfg.params
    table = link_spectrum(P["gamma_max"])
    print("n1,n2,gamma,multiplicity,alpha,beta")
    for row in table.rows():
        print(",".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in row))
    if P["out"]:
        spectrum_rows_csv(table, P["out"], config=cfg.echo())
    return EXIT_OK


def cmd_stability(cfg):
    from .spectral import stability_check

    verdict = stability_check(gamma_cutoff=cfg.params["gamma_cutoff"])
    print(verdict.summary())
    print(f"alpha above 1: {[round(a, 12) for a in verdict.alpha_above_one]}")
    print(f"lambda=1 multiplicity: {verdict.lambda1_multiplicity}; "
          f"coordinate residual: {verdict.coordinate_residual:.3e}; rank: {verdict.coordinate_rank}")
    return EXIT_OK if verdict.stable else EXIT_CHECK_FAILED


def cmd_model(cfg):
    from .calib_core import defect_total, flat_structure
    from .local_models import defining_residual, plane_radius_for_ball, sample_model
    from .varifold import mass_in_ball, write_jsonl

    P = cfg.params
    R = P["R"]
    bound = R if P["id"] == "Cone" else plane_radius_for_ball(R)
    V = sample_model(P["id"], bound, P["n_rho"], P["n_angle"])
    print(f"model {P['id']}: {len(V)} samples in B_{R:g}")
    print(f"mass in B_{R:g}: {mass_in_ball(V, None, R * (1 + 1e-12)):.12g}")
    print(f"max SL defect: {defect_total(flat_structure(3), V.frames).max():.3e}")
    print(f"max defining-equation residual: {defining_residual(P['id'], V.points).max():.3e}")
    if P["out"]:
        write_jsonl(V, P["out"])
    return EXIT_OK


def cmd_fiber(cfg):
    from .calib_core import defect_total, flat_structure
    from .local_models import classify_fiber, fiber_label, sample_fiber
    from .varifold import write_jsonl

    P = cfg.params
    if P["c"] is None:
        raise ValueError("--c is required")
    c = _floats(P["c"], 3, "--c")
    cls = classify_fiber(c)
    model = cls.model.value if cls.model is not None else None
    print(f"class: {cls.kind}; model: {model}; scale: {cls.scale}; "
          f"distance to Y: {cls.distance:.3e}; near discriminant: {cls.near_discriminant}")
    if cls.kind != "SmoothCylinder":
        print("singular fiber; use L_c (sample the model with the reported scale)")
        return EXIT_OK
    V = sample_fiber(c, P["T"], P["n_t"], P["n_angle"])
    print(f"samples: {len(V)}; label spread: {np.abs(fiber_label(V.points) - c).max():.3e}; "
          f"max SL defect: {defect_total(flat_structure(3), V.frames).max():.3e}")
    if P["out"]:
        write_jsonl(V, P["out"])
    return EXIT_OK


def _aligned_model(target, rho, n_rho, n_angle):
    from .local_models import plane_radius_for_ball, sample_model

    def sampler(model):
        bound = rho if model == "Cone" else plane_radius_for_ball(rho)
        return sample_model(model, bound, n_rho, n_angle)

    return _load_target(target, sampler)


def cmd_energy(cfg):
    from .varifold import energy, restrict_annulus

    P = cfg.params
    if not 0 <= P["sigma"] < P["rho"]:
        raise ValueError("need 0 <= sigma < rho")
    V = _aligned_model(P["target"], P["rho"], P["n_rho"], P["n_angle"])
    E = energy(restrict_annulus(V, P["sigma"], P["rho"]))
    print(f"energy on A[{P['sigma']:g},{P['rho']:g}): {E:.12g}")
    return EXIT_OK


def cmd_monotonicity(cfg):
    from .hl_cone import cone_ball_volume
    from .varifold import density_table, monotonicity_residual, write_density_csv

    P = cfg.params
    tol = P["tol"] if P["tol"] is not None else 1e-3 * cone_ball_volume()
    V = _aligned_model(P["target"], P["rho"], P["n_rho"], P["n_angle"])
    res = monotonicity_residual(V, P["sigma"], P["rho"])
    ok = abs(res) < tol
    print(f"monotonicity residual on ({P['sigma']:g}, {P['rho']:g}): {res:.6e} (tol {tol:.3e}) "
          f"{'PASS' if ok else 'FAIL'}")
    if P["out"]:
        radii = np.geomspace(P["sigma"], P["rho"], 12)
        write_density_csv(density_table(V, radii), P["out"],
                          header_comment=f"density ratio and annulus energy; config={cfg.echo()}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _chart_target(name, b=None):
    from .local_models import ModelId, scale_translate
    from .varifold import read_jsonl, translate

    if name in {m.value for m in ModelId}:
        return scale_translate(name, 1.0, b)
    V = read_jsonl(name)
    return translate(V, b) if b is not None else V


def _annulus_grid(text, shells, n_theta):
    from .hl_cone import ConeGrid

    lo, hi = _floats(text, 2, "--annulus")
    if not 0 < lo < hi:
        raise ValueError("annulus needs 0 < sigma < rho")
    return ConeGrid.shells(np.geomspace(lo, hi, shells), n_theta)


def cmd_decay(cfg):
    from .asymptotics import decay_report, graph_over_cone

    P = cfg.params
    grid = _annulus_grid(P["annulus"], P["shells"], P["n_theta"])
    rep = decay_report(graph_over_cone(_chart_target(P["target"]), grid))
    lead = "none" if rep.leading_exponent is None else f"{rep.leading_exponent:.6f}"
    print(f"leading exponent: {lead} (snapped {rep.leading_snapped}); tail norm {rep.tail_norm:.3e}")
    print(f"lambda=1 block: {np.array2string(rep.lambda1_block, precision=6)}")
    for md in rep.modes[:12]:
        x = md.snapped if md.snapped is not None else md.exponent
        flag = " off-grid" if md.off_grid else ""
        print(f"  {md.label}: exponent {x:.6g}, coefficient {md.coefficient:.6e}{flag}")
    if P["out"]:
        rep.write_csv(P["out"], header_comment=f"config={cfg.echo()}")
    return EXIT_OK


def cmd_recenter(cfg):
    from .asymptotics import recenter

    P = cfg.params
    b = _floats(P["b"], 6, "--b")
    grid = _annulus_grid(P["annulus"], P["shells"], P["n_theta"])
    rc = recenter(_chart_target(P["target"], b), grid)
    print(f"b_hat: {np.array2string(rc.b, precision=8)}; iterations {rc.iterations}; "
          f"already centered: {rc.already_centered}")
    return EXIT_OK


def _read_input(P):
    from .varifold import read_jsonl

    if not P["input"]:
        raise ValueError("--input is required")
    return read_jsonl(P["input"])


def cmd_bubble_scan(cfg):
    from .bubble import DEFAULT_EPS, ClassificationError, bubble_center, classify_bubble, extract_bubble

    P = cfg.params
    V = _read_input(P)
    eps = DEFAULT_EPS if P["eps"] in (None, "auto") else float(P["eps"])
    if eps <= 0:
        raise ValueError("eps must be positive")
    scan = bubble_center(V, rho=P["rho"], eps=eps)
    out = scan.report()
    code = EXIT_OK
    if not scan.found:
        out.update({"model": None, "s": None, "b": None, "residual": None, "status": "no bubble"})
    else:
        W = extract_bubble(V, scan.y_star, scan.delta_star)
        try:
            fit = classify_bubble(W)
            out.update(fit.report())
            out["status"] = "classified"
        except ClassificationError as exc:
            out.update({"model": None, "s": None, "b": None, "residual": None, "status": str(exc)})
            code = EXIT_CLASSIFICATION
    _emit_json(out, P["out"], cfg)
    return code


def cmd_classify(cfg):
    from .bubble import ClassificationError, classify_bubble

    P = cfg.params
    W = _read_input(P)
    try:
        fit = classify_bubble(W)
    except ClassificationError as exc:
        _emit_json({"status": str(exc)}, P["out"], cfg)
        return EXIT_CLASSIFICATION
    out = fit.report()
    out["status"] = "classified"
    _emit_json(out, P["out"], cfg)
    return EXIT_OK


def cmd_selfcheck(cfg):
    from .selfcheck import run_checks

    results = run_checks(seed=cfg.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_CHECK_FAILED


COMMANDS = {
    "spectrum": cmd_spectrum,
    "stability": cmd_stability,
    "model": cmd_model,
    "fiber": cmd_fiber,
    "energy": cmd_energy,
    "monotonicity": cmd_monotonicity,
    "decay": cmd_decay,
    "recenter": cmd_recenter,
    "bubble-scan": cmd_bubble_scan,
    "classify": cmd_classify,
    "selfcheck": cmd_selfcheck,
}


def run(argv=None):
    """Parse ``argv`` and execute; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        print(f"config: {cfg.echo()}")
        return COMMANDS[cfg.command](cfg)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


def main():
    sys.exit(run())
