"""Acceptance checks run by ``nlsd reproduce-paper`` and the test suite.

Each check returns a CriterionResult; expensive runs (branch, spectra,
evolutions, interactions) are shared between checks through a per-instance
cache.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import experiments as ex
from .dynamics import SimulationConfig, evolve
from .model import ComplexField, Grid, ModelParams, RealProfile, salerno_cutoff
from .stability import assemble_linearization, spectrum
from .stationary import continue_branch, nls_soliton, soliton_on_grid, solve_newton
from .variational import va_predict

EPS = np.finfo(float).eps


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    target: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} {tag}  {self.title}: {self.summary}  [target: {self.target}]"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": bool(self.passed),
                "summary": self.summary, "target": self.target, "values": _plain(self.values)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def shipped_config(name: str) -> dict:
    """A JSON experiment config shipped inside the package."""
    text = resources.files("nlsd").joinpath("configs", name).read_text()
    return json.loads(text)


def shipped_configs() -> list[str]:
    return sorted(p.name for p in resources.files("nlsd").joinpath("configs").iterdir()
                  if p.name.endswith(".json"))


PERTURBATION_RUNS = {
    "stable": "perturb_stable_k0.3.json",
    "plus_odd": "perturb_k0.4_plus_odd.json",
    "plus_even": "perturb_k0.4_plus_even.json",
    "minus_even": "perturb_k0.4_minus_even.json",
    "beta2": "perturb_beta2_gamma0_plus_even.json",
    "gamma2": "perturb_beta0_gamma2_plus_even.json",
}


class Reproduction:
    """Runs the shipped experiments on demand and evaluates the criteria.

    Parameters
    ----------
    out : path, optional
        When given, every underlying experiment writes its manifest and
        artifacts to ``out/<config stem>``.
    plots : bool
        Emit figures for the underlying experiments.
    """

    def __init__(self, out: Path | str | None = None, plots: bool = False):
        self.out = None if out is None else Path(out)
        self.plots = plots
        self._cache: dict = {}

    def run(self, name: str) -> dict:
        if name in self._cache:
            return self._cache[name]
        raw = shipped_config(name)
        command = raw["command"]
        cfg = ex.merged_config(command, raw, {"plots": self.plots})
        target = None
        if self.out is not None:
            target = self.out / name.removesuffix(".json")
            ex.write_manifest(target, command, cfg)
        res = ex.RUNNERS[command](cfg, target)
        res["config"] = cfg
        self._cache[name] = res
        return res

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    # 1
    def criterion_1(self) -> CriterionResult:
        err = {}
        for dx in (0.04, 0.02):
            g = Grid.symmetric(24.0, dx)
            guess = RealProfile(1.2 / np.cosh(0.9 * g.eta), g)
            sol = solve_newton(guess, 1.0, ModelParams(0.0, 0.0))
            err[dx] = float(np.max(np.abs(sol.values - nls_soliton(g.eta))))
        ratio = err[0.04] / err[0.02]
        ok = err[0.02] <= 1e-3 and 3.5 <= ratio <= 4.5
        return CriterionResult(1, "NLS limit exactness", ok,
                               f"max error {err[0.02]:.3e} at dx=0.02, ratio {ratio:.3f}",
                               "error <= 1e-3, ratio in [3.5, 4.5]",
                               {"error_dx0.02": err[0.02], "error_dx0.04": err[0.04], "ratio": ratio})

    # 2
    def criterion_2(self) -> CriterionResult:
        cut = self.run("branch_beta1_gamma1.json")["cutoff"]
        k_co = cut["k_co"]
        ok = abs(k_co - 0.33) <= 0.01
        return CriterionResult(2, "cutoff location", ok, f"k_co = {k_co:.4f}", "0.33 +- 0.01", dict(cut))

    # 3
    def criterion_3(self) -> CriterionResult:
        rep = self.run("constants.json")["report"]
        targets = {"C_k": (0.66, 0.02), "C_P": (2.35, 0.07), "C_A": (1.28, 0.05), "C_W": (2.42, 0.07)}
        got = {"C_k": rep.C_k, "C_P": rep.C_P, "C_A": rep.C_A, "C_W": rep.C_W}
        ok_each = {n: abs(got[n] - t) <= tol for n, (t, tol) in targets.items()}
        spread = max(rep.spread.values())
        ok = all(ok_each.values()) and spread <= 0.03
        txt = ", ".join(f"{n}={got[n]:.4f}" for n in got) + f", spread {spread:.2e}"
        return CriterionResult(3, "universal constants", ok, txt,
                               "0.66+-0.02, 2.35+-0.07, 1.28+-0.05, 2.42+-0.07, spread <= 3%",
                               {**got, "C_P_unnormalized": rep.C_P_unnormalized, "spread": rep.spread,
                                "within": ok_each})

    # 4
    def criterion_4(self) -> CriterionResult:
        s = np.round(np.arange(1, 20) * 0.05, 12)
        curves = {}
        for bg in ((1.0, 1.0), (2.0, 0.0), (0.0, 4.0)):
            p = ModelParams(*bg)
            br = continue_branch(s / p.sigma, p)
            curves[bg] = br.power / np.sqrt(br.k)
        keys = list(curves)
        dev = max(float(np.max(np.abs(curves[a] - curves[b])))
                  for i, a in enumerate(keys) for b in keys[i + 1:])
        return CriterionResult(4, "scaling collapse", dev <= 1e-6, f"max pairwise deviation {dev:.2e}",
                               "<= 1e-6", {"max_deviation": dev, "s": s})

    def _spectrum_rows(self):
        return self.run("spectrum_beta1_gamma1.json")["rows"]

    # 5
    def criterion_5(self) -> CriterionResult:
        rows = self._spectrum_rows()
        ks = np.array([r["k"] for r in rows])
        lam = np.array([r["max_lambda_sq"] for r in rows])
        slope = np.array([r["vk_slope"] for r in rows])
        step = float(np.min(np.diff(ks)))
        k_lam = _first_sign_change(ks, lam, rising=True)
        k_vk = _first_sign_change(ks, slope, rising=False)
        ok = k_lam is not None and k_vk is not None and abs(k_lam - k_vk) <= step * (1 + 1e-9)
        txt = f"max lambda^2 turns positive at k={k_lam}, dP/dk turns negative at k={k_vk}"
        return CriterionResult(5, "VK/spectral agreement", ok, txt, "within one k-step (0.01)",
                               {"k": ks, "max_lambda_sq": lam, "vk_slope": slope,
                                "k_lambda": k_lam, "k_vk": k_vk})

    # 6
    def criterion_6(self) -> CriterionResult:
        br = self.run("branch_beta1_gamma1.json")["branch"]
        p = ModelParams(1.0, 1.0)
        err = {}
        for k in (0.05, 0.5):
            i = int(np.argmin(np.abs(br.k - k)))
            sol = br.solutions[i]
            va = va_predict(float(br.k[i]), p)
            err[k] = {"amplitude": abs(va.A - sol.amplitude) / sol.amplitude,
                      "fwhm": abs(va.fwhm - sol.fwhm) / sol.fwhm}
        ok = err[0.05]["amplitude"] <= 0.05 and err[0.05]["fwhm"] <= 0.05 and err[0.5]["fwhm"] > 0.15
        txt = (f"k=0.05 amplitude {100 * err[0.05]['amplitude']:.1f}%, FWHM {100 * err[0.05]['fwhm']:.1f}%;"
               f" k=0.5 FWHM {100 * err[0.5]['fwhm']:.1f}%")
        return CriterionResult(6, "VA accuracy regime", ok, txt,
                               "k=0.05 both <= 5%, k=0.5 FWHM > 15%", {"errors": err})

    # 7
    def criterion_7(self) -> CriterionResult:
        def extra():
            out = []
            for (b, g, k) in ((0.0, 0.0, 1.0), (2.0, 0.0, 0.4), (0.0, 2.0, 0.4)):
                sol = continue_branch([k], ModelParams(b, g)).solutions[0]
                spec = spectrum(assemble_linearization(sol))
                out.append({"k": k, "beta": b, "gamma": g, "zero_modes": spec.smallest_magnitudes().tolist(),
                            "zero_tol": spec.zero_tolerance()})
            return out
        rows = [{"k": r["k"], "beta": 1.0, "gamma": 1.0, "zero_modes": r["zero_modes"], "zero_tol": r["zero_tol"]}
                for r in self._spectrum_rows()] + self._cached("zero_mode_extra", extra)
        worst = max(max(r["zero_modes"]) / r["zero_tol"] for r in rows)
        return CriterionResult(7, "zero modes", worst <= 1.0,
                               f"{len(rows)} solitons, worst |lambda^2| / (10 dx^2 k) = {worst:.2e}",
                               "two smallest |lambda^2| <= 10 dx^2 k", {"rows": rows})

    def _dt_ratio(self) -> float:
        p = ModelParams(1.0, 1.0)
        g = Grid.symmetric(20.0, 0.2)
        q0 = ComplexField.from_real(soliton_on_grid(0.3, p, g).profile)

        def final(f):
            r = evolve(q0, p, SimulationConfig(xi_max=2.0, dt_factor=f, dt_safety=0.6), classify=None)
            return r.final.values
        ref = final(0.4 / 64)
        e1 = np.max(np.abs(final(0.4) - ref))
        e2 = np.max(np.abs(final(0.2) - ref))
        return float(e1 / e2)

    # 8
    def criterion_8(self) -> CriterionResult:
        res = self.run(PERTURBATION_RUNS["stable"])["result"]
        dP = res.drift("power")
        dH = res.drift("hamiltonian")
        ratio = self._cached("dt_ratio", self._dt_ratio)
        ok = res.config.sponge is None and dP <= 1e-7 and dH <= 1e-6 and abs(ratio - 16.0) <= 4.0
        return CriterionResult(8, "conservation under evolution", ok,
                               f"|dP|/P {dP:.2e}, |dH|/|H| {dH:.2e}, dt-halving error ratio {ratio:.2f}",
                               "dP <= 1e-7, dH <= 1e-6, ratio 16 +- 4",
                               {"power_drift": dP, "hamiltonian_drift": dH, "dt_ratio": ratio})

    # 9
    def criterion_9(self) -> CriterionResult:
        out = {key: self.run(PERTURBATION_RUNS[key])["result"] for key in ("stable", "plus_odd", "plus_even", "minus_even")}
        checks = {
            "k=0.3 no collapse": out["stable"].collapse is None,
            "k=0.4 +odd collapse": out["plus_odd"].collapse is not None,
            "k=0.4 +even collapse": out["plus_even"].collapse is not None,
            "k=0.4 -even breather": out["minus_even"].collapse is None and out["minus_even"].outcome == "breather",
        }
        txt = "; ".join(f"{k}: {'yes' if v else 'no'}" for k, v in checks.items())
        return CriterionResult(9, "perturbation phenomenology", all(checks.values()), txt,
                               "all four outcomes", {"checks": checks,
                                                     "outcomes": {k: r.outcome for k, r in out.items()}})

    # 10
    def criterion_10(self) -> CriterionResult:
        rb = self.run(PERTURBATION_RUNS["beta2"])["result"]
        rg = self.run(PERTURBATION_RUNS["gamma2"])["result"]
        xb = rb.collapse.xi_collapse if rb.collapse else math.inf
        xg = rg.collapse.xi_collapse if rg.collapse else math.inf
        ok = math.isfinite(xg) and xg < xb
        return CriterionResult(10, "beta/gamma asymmetry", ok,
                               f"xi_collapse(0,2) = {xg:.3f}, xi_collapse(2,0) = {xb:.3f}",
                               "xi_collapse(0,2) < xi_collapse(2,0)", {"gamma2": xg, "beta2": xb})

    # 11
    def criterion_11(self) -> CriterionResult:
        res = self.run("interactions.json")
        table = res["table"]
        match = {f"{r['phase']} ({r['beta']:g},{r['gamma']:g})": r["outcome"] == r["expected"] for r in table}
        sep = {(r["beta"], r["gamma"]): r["separation_at_ordering_xi"]
               for r in table if r["phase"] == "out-of-phase"}
        base, beta_run, gamma_run = sep[(0.0, 0.0)], sep[(0.6, 0.0)], sep[(0.0, 0.6)]
        ordered = gamma_run > base > beta_run
        wrong = [f"{k} -> {r['outcome']}" for (k, ok), r in zip(match.items(), table) if not ok]
        txt = (f"{sum(match.values())}/{len(match)} outcomes match"
               + (f" (mismatch: {'; '.join(wrong)})" if wrong else "")
               + f"; separation gamma {gamma_run:.2f}, baseline {base:.2f}, beta {beta_run:.2f}")
        return CriterionResult(11, "interaction matrix", all(match.values()) and ordered, txt,
                               "8 outcomes match, gamma > baseline > beta",
                               {"table": table, "ordered": ordered})

    # 12
    def criterion_12(self) -> CriterionResult:
        ms = np.round(np.arange(1, 10) * 0.1, 12)
        prod = np.array([salerno_cutoff(m) * m / (1.0 - m) for m in ms])
        dev = float(np.max(np.abs(prod - 1.0)))
        return CriterionResult(12, "Salerno cutoff", dev <= 2 * EPS,
                               f"max |cutoff*m/(1-m) - 1| = {dev:.2e}", "1 to rounding (<= 2 ulp)",
                               {"m": ms, "product": prod})


def _first_sign_change(x, y, rising: bool):
    for i in range(1, len(y)):
        a, b = y[i - 1], y[i]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if (rising and a <= 0 < b) or (not rising and a >= 0 > b):
            return float(x[i])
    return None


CRITERIA = tuple(range(1, 13))


def run_all(numbers=None, out: Path | str | None = None, plots: bool = False) -> list[CriterionResult]:
    """Evaluate the selected criteria (all by default) in order."""
    rep = Reproduction(out, plots)
    results = [getattr(rep, f"criterion_{n}")() for n in (numbers or CRITERIA)]
    if rep.out is not None:
        rep.out.mkdir(parents=True, exist_ok=True)
        doc = [r.to_dict() for r in results]
        (rep.out / "acceptance.json").write_text(json.dumps(doc, indent=2) + "\n")
    return results
