import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from qlogic_gfactor.classical import (
    AxialNoiseModel,
    CoolingModel,
    DoubleTrapTimings,
    axial_sample,
    detect_spin_flip,
    detection_operating_point,
    double_trap_cycle,
    majority_error,
    majority_rates,
    mean_occupation,
    required_repetitions,
    resistive_cool,
    sample_thermal,
    single_shot_error,
    thermal_occupation,
)
from qlogic_gfactor.config import (
    double_trap_timings,
    load_config,
)
from qlogic_gfactor.errors import ConfigError, DomainError
from qlogic_gfactor.models import SpinFlipDetection, TrapZone
from qlogic_gfactor.species import PROTON
from qlogic_gfactor.streams import substream
from qlogic_gfactor.trap import perturbed_modes

EXAMPLE = Path(__file__).parents[1] / "configs" / "example.toml"
ANALYSIS = TrapZone(name="analysis", B0=1.9, V0=0.1484, d_char=1e-3, B2=3e5)
MODES = perturbed_modes(PROTON, ANALYSIS)
COOLING = CoolingModel(tau_resistive=100.0, T_equilibrium=4.2)


def test_thermal_occupation_of_proton_cyclotron() -> None:
    assert thermal_occupation(COOLING, MODES) == pytest.approx(3020, rel=0.01)


def test_resistive_cool_limits() -> None:
    rng = substream(1, "test/cooling")
    n_th = thermal_occupation(COOLING, MODES)

    start = resistive_cool(50, COOLING, MODES, 0.0, rng, size=100_000)
    assert float(np.mean(start)) == pytest.approx(50, rel=0.02)

    settled = resistive_cool(50, COOLING, MODES, 20 * COOLING.tau_resistive, rng, size=100_000)
    assert float(np.mean(settled)) == pytest.approx(n_th, rel=0.02)

    hot = int(10 * n_th)
    one_tau = resistive_cool(hot, COOLING, MODES, COOLING.tau_resistive, rng, size=100_000)
    expected = n_th + (hot - n_th) * math.exp(-1)
    assert expected == pytest.approx(mean_occupation(hot, COOLING, MODES, COOLING.tau_resistive))
    assert float(np.mean(one_tau)) == pytest.approx(expected, rel=0.02)


def test_thermal_sampler_is_geometric() -> None:
    rng = substream(2, "test/geometric")
    n_bar = 3.0
    draws = sample_thermal(n_bar, rng, size=50_000)
    assert isinstance(draws, np.ndarray)
    edges = np.arange(0, 13)
    observed = np.array([np.sum(draws == n) for n in edges[:-1]] + [np.sum(draws >= 12)])
    probs = (n_bar / (1 + n_bar)) ** edges[:-1] / (1 + n_bar)
    expected = np.append(probs, 1 - probs.sum()) * draws.size
    _, p_value = stats.chisquare(observed, expected)
    assert p_value > 1e-3


def test_axial_jitter_scales_with_occupation() -> None:
    rng = substream(3, "test/jitter")
    nm = AxialNoiseModel(sigma0=0.01, detection_time=60.0)
    base = np.std(axial_sample(1e6, 0, nm, rng, size=100_000))
    assert base == pytest.approx(0.01, rel=0.02)
    assert np.std(axial_sample(1e6, 3, nm, rng, size=100_000)) / base == pytest.approx(2, rel=0.02)
    assert np.std(axial_sample(1e6, 99, nm, rng, size=100_000)) / base == pytest.approx(
        10, rel=0.02
    )


def test_zero_jitter_is_exact() -> None:
    rng = substream(4, "test/jitter")
    nm = AxialNoiseModel(sigma0=0.0, detection_time=60.0)
    assert axial_sample(3.7e6, 1000, nm, rng) == 3.7e6
    assert np.all(axial_sample(3.7e6, 5, nm, rng, size=10) == 3.7e6)


def test_single_shot_error() -> None:
    sigma = 0.5
    assert single_shot_error(2 * math.sqrt(2) * sigma, sigma) == pytest.approx(
        stats.norm.cdf(-1.0), rel=1e-12
    )
    assert single_shot_error(1.0, 0.0) == 0.0


def test_majority_error_decreases_with_repetitions() -> None:
    errors = [majority_error(0.2, r) for r in range(1, 40, 2)]
    assert errors[0] == pytest.approx(0.2)
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))
    missed, false_alarm = majority_rates(0.2, 5)
    assert missed == pytest.approx(false_alarm)


def test_required_repetitions() -> None:
    repetitions = required_repetitions(0.174, 0.01)
    assert repetitions % 2 == 1
    assert majority_error(0.174, repetitions) < 0.01
    assert majority_error(0.174, repetitions - 2) >= 0.01
    with pytest.raises(DomainError):
        required_repetitions(0.5, 0.01)


def test_noiseless_detection_is_always_right() -> None:
    nm = AxialNoiseModel(sigma0=0.0, detection_time=60.0)
    for index in range(20):
        rng = substream(5, "test/detect", index)
        flip = index % 2 == 0
        result = detect_spin_flip(
            PROTON, ANALYSIS, nm, COOLING, 3, rng, flip_occurred=flip, modes=MODES
        )
        assert result.decision_correct
        assert result.error_prob == 0.0
        assert result.spin_shift == pytest.approx(1.34, rel=0.02)


def test_detection_needs_bottle() -> None:
    flat = TrapZone(name="flat", B0=1.9, V0=0.1484, d_char=1e-3)
    nm = AxialNoiseModel(sigma0=9.2e-3, detection_time=60.0)
    with pytest.raises(ConfigError):
        detect_spin_flip(PROTON, flat, nm, COOLING, 1, substream(6, "test/detect"))


def test_double_trap_cycle_counts_transport_twice() -> None:
    timings = DoubleTrapTimings(
        transport_time=10.0,
        precision_zone_interrogation_time=10.0,
        analysis_zone_detection_repetitions=3,
    )
    detection = SpinFlipDetection(
        decision=True,
        error_prob=0.01,
        wall_time=1260.0,
        repetitions=3,
        n_plus_mean=3000.0,
        spin_shift=1.34,
        flip_occurred=True,
    )
    assert double_trap_cycle(timings, detection) == 1290.0


def test_example_config_detection_exceeds_an_hour() -> None:
    cfg = load_config(EXAMPLE)
    timings = double_trap_timings(cfg)
    assert timings.analysis_zone_detection_repetitions == 11
    detection = detect_spin_flip(
        PROTON,
        ANALYSIS,
        AxialNoiseModel(sigma0=9.2e-3, detection_time=60.0),
        COOLING,
        timings.analysis_zone_detection_repetitions,
        substream(cfg.master_seed, "test/example"),
        modes=MODES,
    )
    assert detection.error_prob < 0.01
    assert detection.wall_time > 3600
    assert double_trap_cycle(timings, detection) > detection.wall_time


def _noise_for_unit_overlap() -> AxialNoiseModel:
    """Jitter for which the expected shift is 2 * sqrt(2) * sigma(n_bar)."""
    unit = AxialNoiseModel(sigma0=1.0, detection_time=60.0)
    n_bar, shift, _ = detection_operating_point(PROTON, ANALYSIS, unit, COOLING, MODES)
    sigma0 = shift / (2 * math.sqrt(2) * math.sqrt(n_bar + 1))
    return AxialNoiseModel(sigma0=sigma0, detection_time=60.0)


def test_error_prob_falls_as_shift_outgrows_jitter() -> None:
    errors = []
    for sigma0 in (0.05, 0.03, 0.02, 0.012, 9.2e-3, 5e-3, 2e-3):
        nm = AxialNoiseModel(sigma0=sigma0, detection_time=60.0)
        result = detect_spin_flip(
            PROTON, ANALYSIS, nm, COOLING, 1, substream(7, "test/grid"), modes=MODES
        )
        errors.append(result.error_prob)
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))
    assert errors[0] < 0.5


@pytest.mark.parametrize("repetitions", [1, 3])
def test_empirical_detection_error_matches_error_prob(repetitions: int) -> None:
    nm = _noise_for_unit_overlap()
    trials = 20_000
    wrong = 0
    error_prob = 0.0
    for index in range(trials):
        result = detect_spin_flip(
            PROTON,
            ANALYSIS,
            nm,
            COOLING,
            repetitions,
            substream(8, "test/empirical", index),
            flip_occurred=index % 2 == 0,
            modes=MODES,
        )
        wrong += not result.decision_correct
        error_prob = result.error_prob
    expected = majority_error(float(stats.norm.cdf(-1.0)), repetitions)
    assert error_prob == pytest.approx(expected, rel=1e-9)
    tolerance = 4 * math.sqrt(expected * (1 - expected) / trials)
    assert abs(wrong / trials - error_prob) < tolerance


def test_operating_point_drives_repetition_count() -> None:
    cfg = load_config(EXAMPLE)
    assert cfg.axial_noise is not None
    nm = AxialNoiseModel(sigma0=cfg.axial_noise.sigma0, detection_time=60.0)
    _, shift, p_single = detection_operating_point(PROTON, ANALYSIS, nm, COOLING, MODES)
    assert shift == pytest.approx(1.34, rel=0.02)
    repetitions = required_repetitions(p_single, cfg.classical.target_error)
    assert double_trap_timings(cfg).analysis_zone_detection_repetitions == repetitions
