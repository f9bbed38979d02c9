from __future__ import annotations

import pytest

from stablepeg.core_model import Design, StablecoinSpec, build_economy

T = 100.0
THETA_MIN, THETA_MAX = 0.5, 3.0

# filled by test_acceptance, printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def reference_economy(**sections):
    return build_economy(sections, T, THETA_MIN, THETA_MAX)


def reference_specs() -> dict[str, StablecoinSpec]:
    return {
        "FiatFull": StablecoinSpec(Design.FIAT_FULL, T, fiat_reserve=T),
        "FiatPartial": StablecoinSpec(Design.FIAT_PARTIAL, T, fiat_reserve=0.5 * T),
        "Crypto": StablecoinSpec(Design.CRYPTO, T),
        "Algo": StablecoinSpec(Design.ALGO, T),
        "Over": StablecoinSpec(Design.OVER, T),
    }


@pytest.fixture(scope="session")
def econ():
    return reference_economy()


@pytest.fixture(scope="session")
def specs():
    return reference_specs()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
