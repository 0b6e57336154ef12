"""Command-line interface.

Subcommands ``fit``, ``adjust``, ``effect``, ``simulate`` chain the model
fit, measurement-error correction, effect estimation, intervals, and the
Monte-Carlo study into reproducible runs.

Conventions
-----------
* Machine-readable output (JSON, schema 1) goes to ``--out`` or stdout;
  human-readable summaries go to stderr. Identical command + inputs +
  seed give byte-identical JSON apart from the manifest timestamp.
* Every result embeds (JSON) or references (CSV sidecar) a run manifest:
  argv, input digests, seeds, package version, resolved settings.
* Exit codes: 0 success, 2 validation problem, 3 numerical failure,
  64 usage error. Failures print one machine-parsable line:
  ``medshift: error [<slug>] <message>``.
* A JSON config file (``--config``) can pre-set any flag; explicit flags
  win.
"""

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .data import empirical_common_cause_dist, load_csv
from .effects import indirect_effect, indirect_effect_unadjusted
from .errors import InvalidArgumentError, MedshiftError
from .inference import bootstrap_ci, delta_ci
from .likelihood import FitResult, StarParams, fit_mle
from .measurement_error import adjust
from .plugin import PluginConfig, fit_logit_censored, plugin_indirect_effect
from .simulation import (
    SimScenario,
    carna_scenario,
    run_study,
    sca_scenario,
    write_estimates_csv,
    write_study_csv,
)

_USAGE_EXIT = 64


class _UsageError(Exception):
    """Missing or inconsistent required flags (exit 64)."""


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise _UsageError(f"the following arguments are required: {', '.join(missing)}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"medshift: usage error: {message}", file=sys.stderr)
        raise SystemExit(_USAGE_EXIT)


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest(args, inputs=None, seed=None):
    resolved = {
        k: (str(v) if not isinstance(v, (int, float, bool, str, list, type(None))) else v)
        for k, v in vars(args).items()
        if k != "func"
    }
    return {
        "command": args.command,
        "argv": sys.argv[1:],
        "version": __version__,
        "inputs": {
            name: {"path": str(path), "sha256": _sha256(path)}
            for name, path in (inputs or {}).items()
        },
        "seed": seed,
        "config": resolved,
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
    }


def _emit_json(document, out_path):
    text = json.dumps(document, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _say(msg=""):
    print(msg, file=sys.stderr)


def _pct(x):
    return f"{100.0 * x:.1f}%"


def _fit_document(fit, dataset, manifest):
    p = fit.params
    return {
        "schema": 1,
        "kind": "fit",
        "manifest": manifest,
        "link": fit.link,
        "params": {
            "alpha0": p.alpha0,
            "alpha1": p.alpha1,
            "sigma_mstar2": p.sigma_mstar2,
            "beta0_star": p.beta0_star,
            "beta1_star": p.beta1_star,
            "beta2_star": p.beta2_star,
        },
        "loglik": fit.loglik,
        "info_matrix": [list(map(float, row)) for row in fit.info_matrix],
        "converged": fit.converged,
        "grad_max": fit.grad_max,
        "n_underflow": fit.n_underflow,
        "info_psd": fit.info_psd,
        "n_iter": fit.n_iter,
        "message": fit.message,
        "data": {
            "n": dataset.n,
            "n_detected": dataset.n_detected,
            "n_reclassified": dataset.n_reclassified,
            "pc": [float(v) for v in empirical_common_cause_dist(dataset)],
            "sigma_u": dataset.sigma_u,
            "label": dataset.label,
        },
    }


def _load_fit_document(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "fit" or doc.get("schema") != 1:
        raise InvalidArgumentError(f"{path} is not a schema-1 fit document")
    params = StarParams(**doc["params"])
    fit = FitResult(
        params=params,
        loglik=doc["loglik"],
        info_matrix=np.array(doc["info_matrix"]),
        converged=doc["converged"],
        n_used=doc["data"]["n"],
        link=doc["link"],
        grad_max=doc.get("grad_max", float("nan")),
        n_underflow=doc.get("n_underflow", 0),
        info_psd=doc.get("info_psd", True),
    )
    return fit, doc["data"]


def cmd_fit(args):
    _require(args, "data", "sigma_u")
    dataset = load_csv(
        args.data,
        sigma_u=args.sigma_u,
        assay_limit_override=args.assay_limit_override,
    )
    fit = fit_mle(dataset, link=args.link, n_nodes=args.nodes)
    manifest = _manifest(args, inputs={"data": args.data})
    _emit_json(_fit_document(fit, dataset, manifest), args.out)
    p = fit.params
    _say(f"fit ({fit.link} link) on n={dataset.n}, {dataset.n_detected} detected"
         + (f", {dataset.n_reclassified} reclassified" if dataset.n_reclassified else ""))
    _say(f"  alpha0={p.alpha0:.4f}  alpha1={p.alpha1:.4f}  sigma_mstar2={p.sigma_mstar2:.4f}")
    _say(f"  beta0*={p.beta0_star:.4f}  beta1*={p.beta1_star:.4f}  beta2*={p.beta2_star:.4f}")
    _say(f"  loglik={fit.loglik:.4f}  converged={fit.converged}  grad_max={fit.grad_max:.2e}")
    if not fit.converged:
        return 3
    return 0


def cmd_adjust(args):
    _require(args, "fit", "sigma_u")
    fit, _ = _load_fit_document(args.fit)
    if fit.link != "probit":
        raise InvalidArgumentError(
            "measurement-error adjustment is derived for the probit link only; "
            f"this fit used {fit.link!r}"
        )
    adj = adjust(fit.params, args.sigma_u ** 2)
    manifest = _manifest(args, inputs={"fit": args.fit})
    _emit_json(
        {
            "schema": 1,
            "kind": "adjusted_params",
            "manifest": manifest,
            "params": {
                "beta0": adj.beta0,
                "beta1": adj.beta1,
                "beta2": adj.beta2,
                "sigma_m2": adj.sigma_m2,
                "lam": adj.lam,
                "sigma_u2": adj.sigma_u2,
            },
        },
        args.out,
    )
    _say(f"adjusted: beta0={adj.beta0:.4f} beta1={adj.beta1:.4f} beta2={adj.beta2:.4f} "
         f"sigma_m2={adj.sigma_m2:.4f} lambda={adj.lam:.4f}")
    return 0


def _parse_shifts(text):
    try:
        shifts = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise InvalidArgumentError(f"--shifts expects comma-separated numbers, got {text!r}") from None
    if not shifts:
        raise InvalidArgumentError("--shifts is empty")
    return shifts


def cmd_effect(args):
    _require(args, "sigma_u")
    if (args.data is None) == (args.fit is None):
        raise InvalidArgumentError("effect needs exactly one of --data or --fit")
    shifts = _parse_shifts(args.shifts)
    sigma_u2 = args.sigma_u ** 2

    if args.estimator == "mle" and args.link == "logit":
        raise InvalidArgumentError(
            "the closed-form estimator requires the probit link; "
            "use --estimator plugin for logit"
        )
    if args.estimator == "plugin" and args.ci == "delta":
        raise InvalidArgumentError("the plug-in estimator has no delta-method interval; use --ci none")
    if args.estimator == "plugin" and args.data is None:
        raise InvalidArgumentError("the plug-in estimator needs --data (it predicts per record)")
    if args.ci == "boot" and args.data is None:
        raise InvalidArgumentError("bootstrap intervals need --data (the fit alone cannot be resampled)")

    dataset = None
    if args.data is not None:
        dataset = load_csv(args.data, sigma_u=args.sigma_u,
                           assay_limit_override=args.assay_limit_override)
        pc = empirical_common_cause_dist(dataset)
    inputs = {k: v for k, v in (("data", args.data), ("fit", args.fit)) if v is not None}

    results = []
    if args.estimator == "plugin":
        fit = fit_logit_censored(dataset, n_nodes=args.nodes) if args.link == "logit" else fit_mle(
            dataset, link=args.link, n_nodes=args.nodes
        )
        for xi in shifts:
            cfg = PluginConfig(xi=xi, j_draws=args.j_draws, seed=args.seed)
            point = plugin_indirect_effect(dataset, fit, cfg)
            results.append({"shift": xi, "point": point, "se": None, "ci_low": None,
                            "ci_high": None, "ci_low_clipped": None, "ci_high_clipped": None,
                            "method": "none", "level": None, "n_boot_failed": 0})
    else:
        if args.data is not None:
            fit = fit_mle(dataset, link="probit", n_nodes=args.nodes)
        else:
            fit, data_info = _load_fit_document(args.fit)
            if fit.link != "probit":
                raise InvalidArgumentError("--fit document must come from a probit fit")
            pc = np.array(data_info["pc"])
        eff_sigma_u2 = 0.0 if args.unadjusted else sigma_u2
        for xi in shifts:
            if args.ci == "boot":
                est = bootstrap_ci(dataset, eff_sigma_u2, xi, reps=args.reps, seed=args.seed,
                                   pc_policy=args.pc_policy, level=args.level,
                                   n_nodes=args.nodes, n_jobs=args.threads)
            elif args.ci == "delta":
                est = delta_ci(fit, eff_sigma_u2, pc, xi, level=args.level)
            else:
                est = None
            if args.unadjusted:
                point_obj = indirect_effect_unadjusted(fit.params, pc, xi)
            else:
                point_obj = indirect_effect(adjust(fit.params, eff_sigma_u2),
                                            (fit.params.alpha0, fit.params.alpha1), pc, xi)
            entry = {"shift": xi, "point": point_obj.indirect,
                     "ey0": point_obj.ey0, "ey0_shifted": point_obj.ey0_shifted}
            if est is None:
                entry.update({"se": None, "ci_low": None, "ci_high": None,
                              "ci_low_clipped": None, "ci_high_clipped": None,
                              "method": "none", "level": None, "n_boot_failed": 0})
            else:
                entry.update({"se": est.se, "ci_low": est.ci_low, "ci_high": est.ci_high,
                              "ci_low_clipped": est.ci_low_clipped,
                              "ci_high_clipped": est.ci_high_clipped,
                              "method": est.method, "level": est.level,
                              "n_boot_failed": est.n_boot_failed})
            results.append(entry)

    manifest = _manifest(args, inputs=inputs, seed=args.seed if args.ci == "boot" or args.estimator == "plugin" else None)
    document = {
        "schema": 1,
        "kind": "effect",
        "manifest": manifest,
        "estimator": args.estimator,
        "link": args.link if args.estimator == "plugin" else "probit",
        "sigma_u": args.sigma_u,
        "adjusted": (not args.unadjusted) and args.estimator == "mle",
        "results": results,
    }
    _emit_json(document, args.out)
    _say(f"indirect effects ({'plug-in' if args.estimator == 'plugin' else 'closed-form'}, "
         f"{'unadjusted' if args.unadjusted or args.estimator == 'plugin' else 'measurement-error adjusted'})")
    for entry in results:
        line = f"  shift {entry['shift']:g}: {_pct(entry['point'])}"
        if entry["se"] is not None:
            line += (f"  (se {_pct(entry['se'])}, {int(100 * entry['level'])}% CI "
                     f"{_pct(entry['ci_low'])} to {_pct(entry['ci_high'])})")
        _say(line)
    return 0


def cmd_simulate(args):
    shifts = tuple(_parse_shifts(args.shifts)) if args.shifts is not None else None
    if args.scenario in ("carna", "sca"):
        factory = carna_scenario if args.scenario == "carna" else sca_scenario
        kwargs = {"assay_limit": args.assay_limit}
        if shifts is not None:
            kwargs["shifts"] = shifts
        scenario = factory(n=args.n, **kwargs) if args.n else factory(**kwargs)
        inputs = {}
    else:
        with open(args.scenario, encoding="utf-8") as fh:
            scenario = SimScenario.from_dict(json.load(fh))
        overrides = {}
        if args.n:
            overrides["n"] = args.n
        if shifts is not None:
            overrides["shifts"] = list(shifts)
        if args.assay_limit is not None:
            overrides["assay_limit"] = args.assay_limit
        if overrides:
            scenario = SimScenario.from_dict({**scenario.to_dict(), **overrides})
        inputs = {"scenario": args.scenario}
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    result = run_study(
        [scenario],
        reps=args.reps,
        seed=args.seed,
        modes=modes,
        n_nodes=args.nodes,
        level=args.level,
        n_jobs=args.threads,
        keep_estimates=bool(args.emit_estimates),
    )
    write_study_csv(result, args.out)
    if args.emit_estimates:
        write_estimates_csv(result, args.emit_estimates)
    manifest = _manifest(args, inputs=inputs, seed=args.seed)
    manifest_path = args.out + ".manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": 1, "kind": "study-manifest", "manifest": manifest,
                             "outputs": [args.out] + ([args.emit_estimates] if args.emit_estimates else [])},
                            indent=2, sort_keys=True) + "\n")
    _say(f"study: {scenario.label} n={scenario.n} reps={args.reps} seed={args.seed}")
    _say(f"{'mode':<9} {'shift':>5} {'true':>7} {'bias':>7} {'rmse':>7} {'coverage':>9} {'failed':>7}")
    for row in result.rows:
        _say(f"{row.mode:<9} {row.shift:>5.2f} {_pct(row.true_effect):>7} {_pct(row.mean_bias):>7} "
             f"{_pct(row.rmse):>7} {_pct(row.coverage):>9} {row.n_failed:>7}")
    _say(f"wrote {args.out} (manifest: {manifest_path})")
    return 0


def _add_common(parser):
    parser.add_argument("--out", default=None, help="output path (JSON; default stdout)")
    parser.add_argument("--nodes", type=int, default=64,
                        help="Gauss-Legendre order for censored integrals")


def build_parser():
    parser = _Parser(prog="medshift",
                     description="Indirect effects of mediator shifts under assay limits "
                                 "and measurement error")
    parser.add_argument("--config", default=None,
                        help="JSON file of default flag values (flags win)")
    parser.add_argument("--version", action="version", version=f"medshift {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="censored maximum-likelihood fit")
    p_fit.add_argument("--data", default=None, help="CSV with header y,m_star,assay_limit,c")
    p_fit.add_argument("--sigma-u", type=float, default=None,
                       help="external measurement-error SD (log10 scale)")
    p_fit.add_argument("--link", choices=("probit", "logit"), default="probit")
    p_fit.add_argument("--assay-limit-override", type=float, default=None,
                       help="use one assay limit for every record")
    _add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_adj = sub.add_parser("adjust", help="measurement-error correction of a probit fit")
    p_adj.add_argument("--fit", default=None, help="fit JSON produced by `medshift fit`")
    p_adj.add_argument("--sigma-u", type=float, default=None)
    _add_common(p_adj)
    p_adj.set_defaults(func=cmd_adjust)

    p_eff = sub.add_parser("effect", help="indirect effect of mediator shifts")
    p_eff.add_argument("--data", default=None, help="CSV input (fits internally)")
    p_eff.add_argument("--fit", default=None, help="fit JSON input (skips fitting)")
    p_eff.add_argument("--sigma-u", type=float, default=None)
    p_eff.add_argument("--shifts", default="0.5,1.0,1.5,2.0",
                       help="comma-separated leftward shifts (log10 scale)")
    p_eff.add_argument("--unadjusted", action="store_true",
                       help="ignore measurement error (comparison column)")
    p_eff.add_argument("--estimator", choices=("mle", "plugin"), default="mle")
    p_eff.add_argument("--link", choices=("probit", "logit"), default="probit",
                       help="outcome link (plugin estimator only for logit)")
    p_eff.add_argument("--j-draws", type=int, default=100,
                       help="imputation draws per censored record (plugin)")
    p_eff.add_argument("--ci", choices=("none", "delta", "boot"), default="delta")
    p_eff.add_argument("--reps", type=int, default=2000, help="bootstrap replicates")
    p_eff.add_argument("--seed", type=int, default=0)
    p_eff.add_argument("--level", type=float, default=0.95)
    p_eff.add_argument("--pc-policy", choices=("fixed", "resample"), default="fixed",
                       help="common-cause distribution under resampling")
    p_eff.add_argument("--assay-limit-override", type=float, default=None)
    p_eff.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    _add_common(p_eff)
    p_eff.set_defaults(func=cmd_effect)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo study of the estimators")
    p_sim.add_argument("--scenario", default="carna",
                       help="'carna', 'sca', or a scenario JSON file")
    p_sim.add_argument("--n", type=int, default=None, help="sample size per replicate")
    p_sim.add_argument("--reps", type=int, default=2000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--shifts", default=None,
                       help="override the scenario's shifts (comma-separated)")
    p_sim.add_argument("--modes", default="adjusted,ignored")
    p_sim.add_argument("--assay-limit", type=float, default=None,
                       help="override the scenario's assay limit")
    p_sim.add_argument("--level", type=float, default=0.95)
    p_sim.add_argument("--emit-estimates", default=None,
                       help="also write per-replicate estimates to this CSV")
    p_sim.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p_sim.add_argument("--out", default="study.csv", help="output CSV path")
    p_sim.add_argument("--nodes", type=int, default=64)
    p_sim.set_defaults(func=cmd_simulate)

    # Config-file defaults must reach the subparsers as well: each
    # subcommand parses into a fresh namespace that overwrites the parent's.
    parser._medshift_subparsers = (p_fit, p_adj, p_eff, p_sim)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    # Apply config-file defaults before the real parse so explicit flags win.
    if "--config" in argv:
        config_path = argv[argv.index("--config") + 1] if argv.index("--config") + 1 < len(argv) else None
        if config_path:
            try:
                with open(config_path, encoding="utf-8") as fh:
                    defaults = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                print(f"medshift: error [config] cannot read {config_path}: {exc}", file=sys.stderr)
                return 2
            if not isinstance(defaults, dict):
                print("medshift: error [config] config must be a JSON object", file=sys.stderr)
                return 2
            normalized = {k.replace("-", "_"): v for k, v in defaults.items()}
            parser.set_defaults(**normalized)
            for sub in parser._medshift_subparsers:
                sub.set_defaults(**normalized)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"medshift: usage error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    except MedshiftError as exc:
        print(f"medshift: error [{exc.slug}] {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"medshift: error [io] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
