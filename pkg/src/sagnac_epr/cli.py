"""Command-line front end.

Every subcommand accepts ``--seed``, ``--out`` and ``--config``. The config
file holds ``key=value`` lines whose keys are the long option names (dashes
or underscores); command-line flags take precedence. Angles are given in
degrees. Exit status is 0 on success, 1 for usage or configuration errors
and 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import io
import math
import sys

import numpy as np

from . import bell, calibration, rates, tables
from .density import BELL_STATES, bell_state, fidelity, purity
from .detection import (BASES, DEFAULT_WINDOW, AnalyzerSetting, coincidence_prob,
                        fringe_visibility, marginal_probs, polarization_correlation, point_rng,
                        pump_qwp_to_theta, sample_counts, simulate_fringe, write_fringe_csv)
from .errors import ConfigurationError, NumericalError
from .optics import qwp_jones
from .sagnac import (ExperimentConfig, NoiseParams, clockwise_coincidence_probability,
                     output_density, output_state)
from .spdc import PumpField, SpdcSpec
from .tomography import (STANDARD_SETTINGS, bootstrap_fidelity, read_tomo_counts_csv,
                         reconstruct_linear, reconstruct_mle, tomo_counts,
                         write_density_csv, write_tomo_counts_csv)


class UsageError(ConfigurationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_bool.__name__ = "bool"

# dest -> default for each subcommand; flags are parsed with default None so
# that config-file values can be told apart from explicit flags.
_DEFAULTS: dict[str, dict[str, object]] = {}


def _opt(p, cmd, flag, default, type=float, help="", **kw):
    act = p.add_argument(flag, default=None, type=type, help=f"{help} [{default}]", **kw)
    _DEFAULTS.setdefault(cmd, {})[act.dest] = default
    return act


def _common(p, cmd):
    _opt(p, cmd, "--seed", 0, int, "random seed")
    _opt(p, cmd, "--out", None, str, "output file (stdout if omitted)")
    p.add_argument("--config", default=None, help="key=value file; flags override it")


def _experiment(p, cmd):
    s = 1 / math.sqrt(2)
    _opt(p, cmd, "--phi", 180.0, help="dispersion phase between pump and pairs (deg)")
    _opt(p, cmd, "--theta", 0.0, help="extra counterclockwise pump phase (deg)")
    _opt(p, cmd, "--pump-h", s, help="pump H amplitude")
    _opt(p, cmd, "--pump-v", s, help="pump V amplitude")
    _opt(p, cmd, "--hwp1", 45.0, help="HWP1 fast axis (deg)")
    _opt(p, cmd, "--hwp2", 22.5, help="HWP2 fast axis (deg)")
    _opt(p, cmd, "--dephase", 1.0, help="inter-arm coherence factor")
    _opt(p, cmd, "--mode-overlap", 1.0, help="spatial/spectral mode overlap")
    _opt(p, cmd, "--arm-imbalance", 0.0, help="relative counterclockwise amplitude excess")
    _opt(p, cmd, "--gain", 1e-3, help="pair amplitude per pass")
    _opt(p, cmd, "--gain-imbalance", 0.0, help="relative second-pass gain excess")


def _sampling(p, cmd, pair_rate=1e4, duration=1.0):
    _opt(p, cmd, "--pair-rate", pair_rate, help="detected pair rate (Hz)")
    _opt(p, cmd, "--duration", duration, help="integration time per setting (s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sagnac-epr", description="Double-pass Sagnac entangled-pair simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("state", help="output state and its coincidence-sector density")
    _common(p, "state")
    _experiment(p, "state")

    p = sub.add_parser("fringe", help="polarizer scan in one arm with a fixed analyzer in the other")
    _common(p, "fringe")
    _experiment(p, "fringe")
    _sampling(p, "fringe", duration=0.2)
    _opt(p, "fringe", "--basis", "linear", str, "analysis basis", choices=BASES)
    _opt(p, "fringe", "--fixed", 45.0, help="mode-2 polarizer angle (deg)")
    _opt(p, "fringe", "--points", 37, int, "scan points over 0..180 deg")
    _opt(p, "fringe", "--window", DEFAULT_WINDOW, help="coincidence window (s)")
    _opt(p, "fringe", "--accidentals", True, _bool, "add and subtract accidentals")

    p = sub.add_parser("tilt-scan", help="clockwise coincidence probability versus phi")
    _common(p, "tilt-scan")
    _experiment(p, "tilt-scan")
    _sampling(p, "tilt-scan")
    _opt(p, "tilt-scan", "--phi-start", 0.0, help="first phi (deg)")
    _opt(p, "tilt-scan", "--phi-stop", 360.0, help="last phi (deg)")
    _opt(p, "tilt-scan", "--points", 73, int, "scan points")

    p = sub.add_parser("bell-switch", help="diagonal-basis correlation versus pump QWP angle")
    _common(p, "bell-switch")
    _experiment(p, "bell-switch")
    _sampling(p, "bell-switch")
    _opt(p, "bell-switch", "--qwp-start", 0.0, help="first QWP angle (deg)")
    _opt(p, "bell-switch", "--qwp-stop", 90.0, help="last QWP angle (deg)")
    _opt(p, "bell-switch", "--points", 19, int, "scan points")
    _opt(p, "bell-switch", "--pump-input", "circular", str, "pump polarization entering the QWP",
         choices=("circular", "diagonal"))

    p = sub.add_parser("tomo", help="simulated 16-setting tomography")
    _common(p, "tomo")
    _experiment(p, "tomo")
    _sampling(p, "tomo")
    _opt(p, "tomo", "--method", "mle", str, "reconstruction", choices=("mle", "linear"))
    _opt(p, "tomo", "--target", "psi+", str, "Bell state for the fidelity", choices=tuple(BELL_STATES))
    _opt(p, "tomo", "--bootstrap", 100, int, "bootstrap resamples for the fidelity error (0: skip)")
    _opt(p, "tomo", "--counts", None, str, "read counts from this CSV instead of simulating")
    _opt(p, "tomo", "--counts-out", None, str, "also write the counts table here")

    p = sub.add_parser("chsh", help="CHSH parameter from simulated counts")
    _common(p, "chsh")
    _experiment(p, "chsh")
    _sampling(p, "chsh")
    _opt(p, "chsh", "--angles", "optimal", str,
         "'optimal', 'bell' (best for the nearest Bell state) or a,a',b,b' in deg")

    p = sub.add_parser("rates", help="pair-rate bookkeeping")
    _common(p, "rates")
    _opt(p, "rates", "--n1", 3.129e5, help="singles slope arm 1 (Hz/mW)")
    _opt(p, "rates", "--n2", 1.698e5, help="singles slope arm 2 (Hz/mW)")
    _opt(p, "rates", "--nc", 9.065e2, help="coincidence slope (Hz/mW)")
    _opt(p, "rates", "--scan", None, str, "power-scan CSV; overrides the slopes")
    _opt(p, "rates", "--zero-intercept", True, _bool, "fit slopes through the origin")
    _opt(p, "rates", "--eta-if", 0.1, help="filter transmission")
    _opt(p, "rates", "--eta-bs", 0.5, help="splitter transmission")
    _opt(p, "rates", "--eta-d", 0.1, help="optics and detector efficiency")
    _opt(p, "rates", "--roundtrip", 1.3e7, help="round-trip pair rate to compare (Hz/mW)")
    _opt(p, "rates", "--band-low", 1.0, help="lower plausibility bound of the ratio")
    _opt(p, "rates", "--band-high", 10.0, help="upper plausibility bound of the ratio")
    _opt(p, "rates", "--d-type0", rates.D_ZZZ, help="type-0 coefficient (pm/V)")
    _opt(p, "rates", "--d-type2", rates.D_YYZ, help="type-II coefficient (pm/V)")

    p = sub.add_parser("calibrate", help="fit the noise model to measured observables")
    _common(p, "calibrate")
    t = calibration.CalibrationTarget()
    for k in calibration.OBSERVABLES:
        flag = k.replace("_", "-")
        _opt(p, "calibrate", f"--{flag}", getattr(t, k), help=f"target {k}")
        _opt(p, "calibrate", f"--w-{flag}", t.weights[k], help=f"weight of {k}")
    _opt(p, "calibrate", "--mode-overlap", 1.0, help="fixed mode overlap")
    return parser


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, ln in enumerate(fh, 1):
            s = ln.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise ConfigurationError(f"{path}:{n}: expected key=value")
            k, v = (x.strip() for x in s.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def resolve(parser: argparse.ArgumentParser, ns: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the config file, then from built-in defaults."""
    defaults = _DEFAULTS[ns.command]
    cfg = read_config(ns.config) if ns.config else {}
    unknown = set(cfg) - set(defaults)
    if unknown:
        raise ConfigurationError(f"unknown config keys for {ns.command}: {sorted(unknown)}")
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    actions = {a.dest: a for a in sub.choices[ns.command]._actions}
    for dest, default in defaults.items():
        if getattr(ns, dest) is not None:
            continue
        if dest in cfg:
            act = actions[dest]
            try:
                value = act.type(cfg[dest]) if act.type else cfg[dest]
            except ValueError as exc:
                raise ConfigurationError(f"config key {dest}: {exc}") from None
            if act.choices is not None and value not in act.choices:
                raise ConfigurationError(f"config key {dest}: {value!r} not in {list(act.choices)}")
            setattr(ns, dest, value)
        else:
            setattr(ns, dest, default)
    return ns


def experiment_config(ns) -> ExperimentConfig:
    return ExperimentConfig(
        phi=math.radians(ns.phi), theta=math.radians(ns.theta),
        pump=PumpField(ns.pump_h, ns.pump_v),
        hwp1_angle=math.radians(ns.hwp1), hwp2_angle=math.radians(ns.hwp2),
        noise=NoiseParams(ns.dephase, ns.mode_overlap, ns.arm_imbalance),
        spdc=SpdcSpec(pair_amplitude=ns.gain, gain_imbalance=ns.gain_imbalance),
    )


def _positive(ns, *names):
    for n in names:
        if not getattr(ns, n) > 0:
            raise ConfigurationError(f"--{n.replace('_', '-')} must be positive")


def _scan_points(ns, start, stop):
    if ns.points < 2:
        raise ConfigurationError("--points must be at least 2")
    return np.radians(np.linspace(start, stop, ns.points))


def cmd_state(ns, out):
    cfg = experiment_config(ns)
    psi = output_state(cfg)
    rho = output_density(cfg)
    out.write(f"# psi_out = {psi}\n")
    metrics = {f"fidelity_{k}": fidelity(rho, v) for k, v in BELL_STATES.items()}
    metrics.update(purity=purity(rho), s_max=bell.max_chsh(rho))
    write_density_csv(out, rho, metrics)


def cmd_fringe(ns, out):
    _positive(ns, "pair_rate", "duration", "window")
    rho = output_density(experiment_config(ns))
    fixed = math.radians(ns.fixed)
    angles = _scan_points(ns, 0.0, 180.0)
    scan = simulate_fringe(rho, angles, fixed, ns.basis, pair_rate=ns.pair_rate,
                           duration=ns.duration, seed=ns.seed, window=ns.window,
                           accidentals=ns.accidentals, subtract=ns.accidentals)
    out.write(tables.annotation(basis=ns.basis, fixed_deg=ns.fixed))
    write_fringe_csv(out, angles, scan.records)
    out.write(tables.annotation(
        visibility=scan.visibility, visibility_err=scan.visibility_err,
        visibility_exact=fringe_visibility(rho, fixed, ns.basis), offset=scan.offset,
        amplitude=scan.amplitude, phase_deg=math.degrees(scan.phase)))


TILT_COLUMNS = ("phi_deg", "probability", "coincidences")


def cmd_tilt_scan(ns, out):
    _positive(ns, "pair_rate", "duration")
    cfg = experiment_config(ns)
    phis = _scan_points(ns, ns.phi_start, ns.phi_stop)
    probs = np.array([clockwise_coincidence_probability(cfg.with_(phi=p)) for p in phis])
    rows = []
    for i, (p, pr) in enumerate(zip(phis, probs)):
        rec = sample_counts(float(pr), ns.pair_rate, ns.duration, seed=point_rng(ns.seed, i))
        rows.append((math.degrees(p), pr, rec.coincidences))
    model = np.sin(phis / 2) ** 2
    scale = float(model @ probs / (model @ model))
    ss_res = float(np.sum((probs - scale * model) ** 2))
    ss_tot = float(np.sum((probs - probs.mean()) ** 2))
    r2 = 1 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    tables.write_table(out, TILT_COLUMNS, rows)
    out.write(tables.annotation(fit="sin2(phi/2)", scale=scale, r2=r2))


SWITCH_COLUMNS = ("qwp_deg", "theta_deg", "correlation", "c_dd", "c_da", "correlation_sampled")
_PUMP_INPUTS = {
    "circular": np.array([1, 1j]) / math.sqrt(2),
    "diagonal": np.array([1, 1]) / math.sqrt(2),
}


def cmd_bell_switch(ns, out):
    _positive(ns, "pair_rate", "duration")
    base = experiment_config(ns)
    inp = _PUMP_INPUTS[ns.pump_input]
    d, a = math.pi / 4, -math.pi / 4
    rows = []
    for i, q in enumerate(_scan_points(ns, ns.qwp_start, ns.qwp_stop)):
        theta, _ = pump_qwp_to_theta(q, inp)
        rho = output_density(base.with_(pump=PumpField.from_jones(qwp_jones(q) @ inp)))
        s_dd, s_da = AnalyzerSetting(pol1=d, pol2=d), AnalyzerSetting(pol1=d, pol2=a)
        p_dd, p_da = coincidence_prob(rho, s_dd), coincidence_prob(rho, s_da)
        rng = point_rng(ns.seed, i)
        c_dd = sample_counts(p_dd, ns.pair_rate, ns.duration, seed=rng,
                             marginals=marginal_probs(rho, s_dd)).coincidences
        c_da = sample_counts(p_da, ns.pair_rate, ns.duration, seed=rng,
                             marginals=marginal_probs(rho, s_da)).coincidences
        sampled = polarization_correlation(c_dd, c_da) if c_dd + c_da else float("nan")
        # theta in [0, 360) with rounding noise removed so +-180 print alike
        theta_deg = round(math.degrees(theta), 9) % 360.0 + 0.0
        rows.append((math.degrees(q), theta_deg, polarization_correlation(p_dd, p_da),
                     c_dd, c_da, sampled))
    out.write(tables.annotation(pump_input=ns.pump_input))
    tables.write_table(out, SWITCH_COLUMNS, rows)


def cmd_tomo(ns, out):
    if ns.counts:
        with open(ns.counts, encoding="utf-8") as fh:
            settings, records = read_tomo_counts_csv(fh)
    else:
        _positive(ns, "pair_rate", "duration")
        rho_true = output_density(experiment_config(ns))
        settings = STANDARD_SETTINGS
        records = tomo_counts(rho_true, settings, ns.pair_rate, ns.duration, ns.seed)
    if ns.counts_out:
        with open(ns.counts_out, "w", encoding="utf-8", newline="") as fh:
            write_tomo_counts_csv(fh, settings, records)
    target = bell_state(ns.target)
    lin = reconstruct_linear(records, settings)
    rho = reconstruct_mle(records, settings) if ns.method == "mle" else lin
    metrics = {"fidelity": fidelity(rho, target)}
    if ns.method == "mle" and ns.bootstrap > 1:
        _, metrics["fidelity_err"] = bootstrap_fidelity(records, target, settings,
                                                        ns.bootstrap, ns.seed)
    metrics.update(purity=purity(rho), s_max=bell.max_chsh(rho),
                   min_eig_linear=lin.min_eigenvalue)
    write_density_csv(out, rho, metrics)


def _chsh_setting(spec: str, rho) -> bell.ChshSetting:
    key = spec.strip().lower()
    if key == "optimal":
        return bell.optimal_chsh_setting(rho)
    if key == "bell":
        name = max(BELL_STATES, key=lambda k: fidelity(rho, BELL_STATES[k]))
        return bell.BELL_SETTINGS[name]
    try:
        vals = [math.radians(float(x)) for x in spec.split(",")]
    except ValueError:
        raise ConfigurationError(f"bad --angles {spec!r}") from None
    if len(vals) != 4:
        raise ConfigurationError("--angles needs four comma-separated values")
    return bell.ChshSetting(*vals)


_KEY_NAMES = {"ab": "ab", "ab'": "abp", "a'b": "apb", "a'b'": "apbp"}
_OUTCOME_NAMES = {"++": "pp", "--": "mm", "+-": "pm", "-+": "mp"}


def cmd_chsh(ns, out):
    _positive(ns, "pair_rate", "duration")
    rho = output_density(experiment_config(ns))
    setting = _chsh_setting(ns.angles, rho)
    counts = bell.chsh_counts(rho, setting, ns.pair_rate, ns.duration, ns.seed)
    s, sigma = bell.chsh_from_counts(counts)
    rep = dict(zip(("a_deg", "a_prime_deg", "b_deg", "b_prime_deg"), setting.degrees()))
    for key, recs in counts.items():
        for o, r in zip(bell.OUTCOMES, recs):
            rep[f"c_{_KEY_NAMES[key]}_{_OUTCOME_NAMES[o]}"] = r.coincidences
    rep.update(s=s, s_err=sigma, s_exact=bell.chsh_s(rho, setting), s_max=bell.max_chsh(rho),
               violation_sigmas=(s - 2) / sigma if sigma > 0 else float("nan"))
    tables.write_report(out, rep)


def cmd_rates(ns, out):
    if ns.scan:
        with open(ns.scan, encoding="utf-8") as fh:
            data = rates.slopes_from_scan(rates.read_power_scan(fh), ns.zero_intercept)
    else:
        data = rates.RateData(ns.n1, ns.n2, ns.nc)
    chain = rates.EfficiencyChain(ns.eta_if, ns.eta_bs, ns.eta_d)
    rep = rates.rate_report(data, chain, chain, ns.roundtrip, (ns.band_low, ns.band_high),
                            ns.d_type0, ns.d_type2)
    tables.write_report(out, rep)


def cmd_calibrate(ns, out):
    values = {}
    for k in calibration.OBSERVABLES:
        values[k] = getattr(ns, k)
        values[f"w_{k}"] = getattr(ns, f"w_{k}")
    target = calibration.target_from_mapping(values)
    res = calibration.calibrate(target, calibration.SearchConfig(mode_overlap=ns.mode_overlap))
    tables.write_report(out, res.report())


COMMANDS = {
    "state": cmd_state,
    "fringe": cmd_fringe,
    "tilt-scan": cmd_tilt_scan,
    "bell-switch": cmd_bell_switch,
    "tomo": cmd_tomo,
    "chsh": cmd_chsh,
    "rates": cmd_rates,
    "calibrate": cmd_calibrate,
}


def _execute(argv) -> tuple[argparse.Namespace, str]:
    parser = build_parser()
    ns = resolve(parser, parser.parse_args(argv))
    buf = io.StringIO()
    COMMANDS[ns.command](ns, buf)
    return ns, buf.getvalue()


def run(argv=None) -> str:
    """Execute a command line and return its text output (errors propagate)."""
    return _execute(argv)[1]


def main(argv=None) -> int:
    try:
        ns, text = _execute(argv)
        if ns.out:
            with open(ns.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
