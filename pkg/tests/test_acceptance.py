"""Acceptance suite: one test per criterion, each printed as a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal summary) or
``python tests/test_acceptance.py``.
"""

import time

import pytest

from hartree_lab.harness import experiments as ex
from hartree_lab.harness.config import load_config

RESULTS = {}

# criterion -> (experiment, sections, check-name prefixes, runtime limit in seconds)
CRITERIA = {
    1: ("exchange-term scaling, slope -1", "exchange_scaling", [ex.section_exchange], ["exchange."], 60),
    2: ("Coulomb exchange scaling, slope -2/3", "exchange_scaling", [ex.section_coulomb], ["coulomb."], 60),
    3: ("Husimi positivity threshold", "residuals", [ex.section_husimi_threshold], ["husimi."], 120),
    4: ("mu invariants |mu| <= 1, mu(0,0) = 1", "residuals", [ex.section_mu_bounds], ["mu."], 120),
    5: ("dynamics conservation suite", "residuals", [ex.section_conservation],
        ["nbody.", "hartree.", "pauli"], 300),
    6: ("equation residuals and BBGKY consistency", "residuals", [ex.section_residuals], ["residual."], 600),
    7: ("hierarchy bounds K, M <= closed forms", "hierarchy_bounds", [ex.section_bounds], ["bounds."], 600),
    8: ("Duhamel identity at n = 1", "hierarchy_bounds", [ex.section_duhamel], ["duhamel."], 600),
    9: ("Gaussian-norm lemma", "hierarchy_bounds", [ex.section_lemma], ["lemma."], 60),
    10: ("closed-form calculator spot values", "hierarchy_bounds", [ex.section_closed_forms], ["closed."], 1),
    11: ("appendix suite: gap exponent, displacement band, alpha sweep", "appendix_checks",
         [ex.section_gap_exponent, ex.section_displacement],
         ["gap.plane_wave.exponent", "gap.localized.exponent", "displacement."], 600),
    12: ("semiclassical Hartree-Vlasov gap trend", "vlasov_gap", [ex.section_vlasov_gap], ["vlasov."], 900),
}


def evaluate(number: int):
    title, exp, sections, prefixes, limit = CRITERIA[number]
    cfg = load_config(experiment=exp)
    t0 = time.perf_counter()
    checks = []
    for fn in sections:
        checks += fn(cfg).checks
    wall = time.perf_counter() - t0
    picked = [c for c in checks if any(c.name.startswith(p) for p in prefixes)]
    ok = bool(picked) and all(c.passed for c in picked) and wall < limit
    detail = ", ".join(f"{c.name}={c.value:.4g}" for c in picked)
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}  [{detail}]  ({wall:.1f}s < {limit}s)"
    RESULTS[number] = line
    return ok, picked, wall, limit, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, picked, wall, limit, line = evaluate(number)
    print(line)
    assert picked, "no checks recorded"
    failed = [c.name for c in picked if not c.passed]
    assert not failed, line
    assert wall < limit, line


if __name__ == "__main__":
    for n in sorted(CRITERIA):
        print(evaluate(n)[-1], flush=True)
