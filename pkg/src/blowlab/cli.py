"""Config-driven experiment runner.

Subcommands stage the pipeline (profile -> eigen -> solve -> certify ->
verify -> report) over the cases of a plain-text key-value config; every
numeric choice (grids, schedules, tolerances, fit windows) must appear in
the config, and artifacts are deterministic: rerunning a stage with the
same inputs rewrites byte-identical files.

Exit codes: 0 ok, 1 failed certificate or theorem row, 2 unknown case
label, 3 missing upstream artifact, 4 malformed config.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .analysis import (
    StructureClass,
    certify_supersolution,
    compare_to_cone,
    fit_rate,
    verify_theorem,
)
from .errors import BlowlabError, ConfigError, MissingArtifactError
from .operators import (
    conformal_operator,
    conformal_quadratic_metric,
    euclidean_operator,
)
from .profiles import (
    GridSpec,
    SphericalDomain1D,
    profile_from_csv,
    profile_to_csv,
    solve_profile,
)
from .reports import (
    fmt,
    write_csv,
    write_eigen_csv,
    write_field_csv,
    write_loglog_svg,
    write_markdown_table,
    write_ratio_csv,
)
from .solver import DomainSpec2D, SolveConfig, solve
from .spectral import first_eigenpair

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_UNKNOWN_CASE = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_BAD_CONFIG = 4

STAGES = ("profile", "eigen", "solve", "certify", "verify", "report")


# ---------------------------------------------------------------------------
# config parsing


def _parse_floats(text):
    return tuple(float(tok) for tok in text.split())


class Case:
    def __init__(self, label, options):
        self.label = label
        self.opt = dict(options)
        self.stages = tuple(self.opt.get("stages", "").split())
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ConfigError(f"case {label}: unknown stages {sorted(unknown)}")

    def get(self, key, cast=str, required=True, default=None):
        if key not in self.opt:
            if required and default is None:
                raise ConfigError(f"case {self.label}: missing key {key!r}")
            return default
        try:
            if cast is bool:
                return self.opt[key].strip().lower() in ("1", "true", "yes")
            return cast(self.opt[key])
        except ValueError as exc:
            raise ConfigError(f"case {self.label}: bad value for {key}: {exc}")

    # -- domain / operator builders ---------------------------------------
    def spherical_domain(self):
        return SphericalDomain1D(
            geometry=self.get("geometry"),
            theta_lo=self.get("theta_lo", float),
            theta_hi=self.get("theta_hi", float),
            bc_lo=self.get("bc_lo", default="blowup"),
            bc_hi=self.get("bc_hi", default="blowup"),
            label=self.label,
        )

    def grid_spec(self):
        return GridSpec(count=self.get("nodes", int),
                        grading=self.get("grading", float))

    def domain2d(self):
        return DomainSpec2D(
            reduction=self.get("reduction"),
            aperture=self.get("aperture", float, default=float(np.pi)),
            r_min=self.get("r_min", float, default=2.0**-8),
            r_max=self.get("r_max", float),
            curve=_parse_floats(self.get("curve", default="") or ""),
            label=self.label,
        )

    def operator(self):
        name = self.get("operator")
        n = self.get("n", int)
        if name == "euclidean":
            return euclidean_operator(n)
        if name == "conformal-quadratic":
            q = self.get("q", float)
            return conformal_operator(conformal_quadratic_metric(n, q))
        raise ConfigError(f"case {self.label}: unknown operator {name!r}")

    def solve_config(self):
        return SolveConfig(
            schedule=_parse_floats(self.get("schedule")),
            newton_tol=self.get("newton_tol", float),
            interior_tol=self.get("interior_tol", float),
            bracket=(self.get("bracket_low", float),
                     self.get("bracket_high", float)),
            bracket_tol=self.get("bracket_tol", float),
            nt_per_octave=self.get("nt_per_octave", int, default=24),
            n_eta=self.get("n_eta", int, default=160),
            eta_grading=self.get("eta_grading", float),
            m_growth=self.get("m_growth", float, default=2.0),
        )


def load_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}")
    if "suite" not in parser:
        raise ConfigError("config needs a [suite] section with an output dir")
    suite = dict(parser["suite"])
    cases = {}
    for section in parser.sections():
        if section.startswith("case:"):
            label = section.split(":", 1)[1]
            cases[label] = Case(label, parser[section])
    if not cases:
        raise ConfigError("config defines no [case:...] sections")
    return suite, cases


# ---------------------------------------------------------------------------
# stage runners (one case each)


def _case_dir(outdir, label):
    path = os.path.join(outdir, label)
    os.makedirs(path, exist_ok=True)
    return path


def _need(path, what, case):
    if not os.path.exists(path):
        raise MissingArtifactError(
            f"case {case}: stage needs {what} at {path}; run the upstream stage"
        )
    return path


def run_profile(case, outdir):
    dom = case.spherical_domain()
    n = case.get("n", int)
    schedule = _parse_floats(case.get("schedule", default="1e2"))
    prof = solve_profile(dom, n, schedule=schedule, grid=case.grid_spec(),
                         interior_tol=case.get("interior_tol", float))
    profile_to_csv(prof, os.path.join(_case_dir(outdir, case.label), "profile.csv"))
    return f"profile: g(lo)={prof.g[0]:.8g} M={prof.truncation:g}"


def run_eigen(case, outdir):
    cdir = _case_dir(outdir, case.label)
    prof = profile_from_csv(_need(os.path.join(cdir, "profile.csv"),
                                  "profile artifact", case.label))
    eig = first_eigenpair(prof)
    write_eigen_csv(os.path.join(cdir, "eigen.csv"), eig)
    from .spectral import regime_exponent

    form = regime_exponent(eig)
    write_csv(
        os.path.join(cdir, "regime.csv"),
        ["lambda1", "mu1", "regime", "predicted_form", "nu_hat"],
        [(eig.lambda1, eig.mu1, eig.regime, form.description, eig.nu_hat)],
    )
    return f"eigen: lambda1={eig.lambda1:.8g} mu1={eig.mu1:.6g} [{eig.regime}]"


def run_solve(case, outdir):
    cdir = _case_dir(outdir, case.label)
    dom = case.domain2d()
    n = case.get("n", int)
    cfg = case.solve_config()
    op = case.operator()
    if dom.reduction != "ball" and not op.is_euclidean:
        base = solve(dom, euclidean_operator(n), n, cfg)
        fld = solve(dom, op, n, cfg, forced_schedule=base.m_history)
        ratio = compare_to_cone(fld, baseline=base)
    else:
        fld = solve(dom, op, n, cfg)
        ratio = compare_to_cone(fld)
    write_field_csv(os.path.join(cdir, "field.csv"), fld)
    fit = fit_rate(ratio, case.get("fit_lo", float), case.get("fit_hi", float),
                   compare_log_model=case.get("log_model", bool, default=False))
    write_ratio_csv(os.path.join(cdir, "ratio.csv"), fit,
                    meta={"reference": ratio.reference,
                          "bracket_width": fld.bracket_width})
    width = "n/a" if fld.bracket_width is None else f"{fld.bracket_width:.3e}"
    return f"solve: alpha_hat={fit.alpha_hat:.4f} bracket_width={width}"


def _read_ratio(cdir, case):
    import json

    path = _need(os.path.join(cdir, "ratio.csv"), "ratio artifact", case)
    with open(path) as fh:
        meta = json.loads(fh.readline()[2:])
        fh.readline()
        table = [tuple(float(x) for x in line.split(",")) for line in fh]
    return meta, table


def run_certify(case, outdir):
    cdir = _case_dir(outdir, case.label)
    n = case.get("n", int)
    candidate = case.get("barrier")
    c_l = case.get("c_l", float)
    op = StructureClass(n=n, c_l=c_l, label=f"class C_L={c_l:g}")
    kw = {}
    if candidate.startswith("cone-"):
        prof = profile_from_csv(_need(os.path.join(cdir, "profile.csv"),
                                      "profile artifact", case.label))
        kw["eigen"] = first_eigenpair(prof)
        cert = certify_supersolution(op, candidate, **kw)
    else:
        cert = certify_supersolution(op, candidate, n=n, **kw)
    write_csv(
        os.path.join(cdir, "certificates.csv"),
        ["barrier", "region", "margin", "nodes", "passed", "constants"],
        [(cert.label, cert.region, cert.margin, cert.node_count, cert.passed,
          ";".join(f"{k}={fmt(v)}" for k, v in sorted(cert.constants.items())))],
    )
    if not cert.passed:
        return f"certify: FAIL margin={cert.margin:.3e}"
    return f"certify: PASS margin={cert.margin:.3e}"


def run_verify(case, outdir):
    cdir = _case_dir(outdir, case.label)
    meta, table = _read_ratio(cdir, case.label)
    from .analysis import RateFit

    fit = RateFit(
        alpha_hat=float(meta["alpha_hat"]),
        c_hat=float(meta["c_hat"]),
        r_squared=float(meta["r_squared"]),
        window=(float(meta["window_lo"]), float(meta["window_hi"])),
        table=table,
        model=meta["model"],
    )
    predicted = case.get("predicted", float, required=False)
    eigen = None
    if predicted is None:
        prof = profile_from_csv(_need(os.path.join(cdir, "profile.csv"),
                                      "profile artifact", case.label))
        eigen = first_eigenpair(prof)
    row = verify_theorem(
        case.label,
        case.get("n", int),
        fit,
        predicted=predicted,
        eigen=eigen,
        slack=case.get("slack", float),
        sharp_at=case.get("sharp_at", float, required=False),
    )
    write_csv(
        os.path.join(cdir, "verify.csv"),
        ["case", "n", "predicted_form", "predicted", "measured", "passed"],
        [(row.case, row.n, row.predicted_form, row.predicted, row.measured,
          row.passed)],
    )
    status = "PASS" if row.passed else "FAIL"
    return (f"verify: predicted={row.predicted:.3g} "
            f"measured={row.measured:.4f} {status}")


def run_report(cases, outdir):
    import json

    rows = []
    cert_rows = []
    failures = 0
    for label in sorted(cases):
        cdir = os.path.join(outdir, label)
        vpath = os.path.join(cdir, "verify.csv")
        if os.path.exists(vpath):
            with open(vpath) as fh:
                fh.readline()
                for line in fh:
                    parts = line.rstrip("\n").split(",")
                    rows.append(parts)
                    if parts[-1] != "true":
                        failures += 1
        cpath = os.path.join(cdir, "certificates.csv")
        if os.path.exists(cpath):
            with open(cpath) as fh:
                fh.readline()
                for line in fh:
                    parts = line.rstrip("\n").split(",")
                    cert_rows.append(parts)
                    if parts[4] != "true":
                        failures += 1
        rpath = os.path.join(cdir, "ratio.csv")
        if os.path.exists(rpath):
            with open(rpath) as fh:
                meta = json.loads(fh.readline()[2:])
                fh.readline()
                pts = [tuple(float(x) for x in line.split(",")) for line in fh]
            if pts:
                write_loglog_svg(
                    os.path.join(cdir, "ratio.svg"),
                    [(label, [p[0] for p in pts], [p[1] for p in pts])],
                    title=f"{label}: cone-approximation decay",
                    fitted=(float(meta["alpha_hat"]), float(meta["c_hat"])),
                )
    write_markdown_table(
        os.path.join(outdir, "report.md"),
        "Verification summary",
        ["case", "n", "predicted form", "predicted", "measured", "passed"],
        rows,
        preamble=(
            "One row per theorem case: the predicted decay exponent of the "
            "cone-approximation error against the measured annulus fit. "
            "Certificates follow."
        ),
    )
    if cert_rows:
        write_markdown_table(
            os.path.join(outdir, "certificates.md"),
            "Barrier certificates",
            ["barrier", "region", "margin", "nodes", "passed", "constants"],
            cert_rows,
        )
    return failures


STAGE_RUNNERS = {
    "profile": run_profile,
    "eigen": run_eigen,
    "solve": run_solve,
    "certify": run_certify,
    "verify": run_verify,
}


def _run_stage_for_case(args):
    stage, case, outdir = args
    message = STAGE_RUNNERS[stage](case, outdir)
    return case.label, message


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="blowlab",
        description="boundary blow-up verification pipeline",
    )
    parser.add_argument("stage", choices=STAGES)
    parser.add_argument("--config", required=True)
    parser.add_argument("--case", default=None, help="run a single case label")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", default=None, help="override the output dir")
    args = parser.parse_args(argv)

    try:
        suite, cases = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    outdir = args.out or suite.get("output")
    if not outdir:
        print("config error: no output directory", file=sys.stderr)
        return EXIT_BAD_CONFIG
    os.makedirs(outdir, exist_ok=True)

    if args.case is not None:
        if args.case not in cases:
            print(f"unknown case label {args.case!r}", file=sys.stderr)
            return EXIT_UNKNOWN_CASE
        cases = {args.case: cases[args.case]}

    if args.stage == "report":
        try:
            failures = run_report(cases, outdir)
        except BlowlabError as exc:
            print(f"report failed: {exc}", file=sys.stderr)
            return EXIT_MISSING_ARTIFACT
        print(f"report written to {outdir} ({failures} failing rows)",
              file=sys.stderr)
        return EXIT_FAILED_CHECK if failures else EXIT_OK

    todo = [(args.stage, case, outdir) for label, case in sorted(cases.items())
            if args.stage in case.stages]
    if not todo:
        print(f"no cases request stage {args.stage!r}", file=sys.stderr)
        return EXIT_OK

    failures = 0
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_run_stage_for_case, todo))
        else:
            results = [_run_stage_for_case(item) for item in todo]
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    for label, message in results:
        print(f"[{label}] {message}", file=sys.stderr)
        if "FAIL" in message:
            failures += 1
    return EXIT_FAILED_CHECK if failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
