import math
from dataclasses import replace

import numpy as np
import pytest

from qlogic_gfactor.classical import AxialNoiseModel, CoolingModel, DoubleTrapTimings
from qlogic_gfactor.errors import AlignmentError, DomainError
from qlogic_gfactor.models import LarmorReading, LineshapeScan, TrapZone
from qlogic_gfactor.protocol import (
    CampaignConfig,
    ClassicalSetup,
    DriftModel,
    DriftProcess,
    QuantumLogicDiscriminator,
    ReadoutSequence,
    ReadoutStep,
    ScanPlan,
    assignment_fidelity,
    compare_cpt,
    fit_resonance,
    flywheel_correct,
    measure_cyclotron,
    rabi_probability,
    readout_response,
    run_campaign,
    run_readout,
    scan_lineshape,
)
from qlogic_gfactor.species import BE9, PROTON, free_cyclotron_frequency, larmor_frequency
from qlogic_gfactor.streams import substream

PRECISION = TrapZone(
    name="precision", B0=1.9, V0=0.1484, d_char=1e-3, tilt_theta=0.002, ellipticity=0.01
)
ANALYSIS = TrapZone(name="analysis", B0=1.9, V0=0.1484, d_char=1e-3, B2=3e5)
SEQUENCE = ReadoutSequence(
    steps=(
        ReadoutStep("larmor_probe", 0.02, 0.99),
        ReadoutStep("proton_red_sideband_pi", 6.6e-3, 0.98),
        ReadoutStep("exchange_swap", 5.8e-3, 0.97),
        ReadoutStep("be_red_sideband_pi", 5e-5, 0.99),
        ReadoutStep("fluorescence_detect", 3e-4, 0.995),
    )
)
OMEGA_L = larmor_frequency(PROTON, 1.9)


def _campaign(**overrides: object) -> CampaignConfig:
    base = CampaignConfig(
        species=PROTON,
        reference=BE9,
        zone=PRECISION,
        scan=ScanPlan(),
        readout=SEQUENCE,
        drift=DriftModel(linear_rate=1e-10, random_walk_amplitude=1e-11),
        reference_relative_sigma=1e-12,
        cyclotron_relative_sigma=1e-10,
        center_guess_offset=1e-8,
    )
    return replace(base, **overrides)  # type: ignore[arg-type]


def test_perfect_readout_reports_the_spin() -> None:
    perfect = ReadoutSequence(
        steps=tuple(ReadoutStep(step.kind, step.duration) for step in SEQUENCE.steps)
    )
    rng = substream(1, "test/readout")
    for spin_up in (True, False) * 50:
        assert run_readout(spin_up, perfect, rng).bright is spin_up
    assert readout_response(perfect) == (1.0, 0.0)
    assert assignment_fidelity(perfect) == 1.0


def test_branch_enumeration_matches_closed_form() -> None:
    transfer = math.prod(step.fidelity for step in SEQUENCE.transfer_steps)
    detect = SEQUENCE.detection_fidelity
    bright_up, bright_down = readout_response(SEQUENCE)
    assert bright_up == pytest.approx(transfer * detect + (1 - transfer) * (1 - detect), rel=1e-12)
    assert bright_down == pytest.approx(1 - detect, rel=1e-12)


def test_readout_monte_carlo_agrees_with_enumeration() -> None:
    rng = substream(2, "test/readout")
    shots = 100_000
    bright_up, _ = readout_response(SEQUENCE)
    observed = sum(run_readout(True, SEQUENCE, rng).bright for _ in range(shots)) / shots
    sigma = math.sqrt(bright_up * (1 - bright_up) / shots)
    assert abs(observed - bright_up) <= 3 * sigma


def test_readout_is_fast() -> None:
    assert SEQUENCE.total_duration < 1.0
    assert SEQUENCE.readout_duration == pytest.approx(0.01275, rel=1e-12)
    assert run_readout(True, SEQUENCE, substream(3, "test/readout")).duration < 1.0


def test_readout_sequence_validation() -> None:
    with pytest.raises(DomainError):
        ReadoutSequence(steps=(ReadoutStep("larmor_probe", 0.02),))
    with pytest.raises(DomainError):
        ReadoutSequence(steps=tuple(reversed(SEQUENCE.steps)))
    with pytest.raises(DomainError):
        ReadoutStep("exchange_swap", 1e-3, fidelity=0.0)


def test_rabi_probability() -> None:
    rabi = 100.0
    t = math.pi / rabi
    assert float(rabi_probability(0.0, rabi, t)) == pytest.approx(1.0, abs=1e-15)
    assert float(rabi_probability(math.sqrt(3) * rabi, rabi, t)) == pytest.approx(0.0, abs=1e-15)
    assert float(rabi_probability(rabi, rabi, t)) == pytest.approx(
        0.5 * math.sin(math.sqrt(2) * math.pi / 2) ** 2, rel=1e-12
    )
    detunings = np.linspace(0, 5 * rabi, 17)
    assert np.array_equal(
        rabi_probability(detunings, rabi, t), rabi_probability(-detunings, rabi, t)
    )


def test_noiseless_scan_is_symmetric_and_fits_exactly() -> None:
    plan = ScanPlan()
    outcome = scan_lineshape(
        OMEGA_L, plan, lambda t: OMEGA_L, substream(4, "test/scan"), noiseless=True
    )
    counts = outcome.scan.counts
    assert np.allclose(counts, counts[::-1], atol=1e-6)
    assert len(outcome.records) == plan.points * plan.shots

    fit = fit_resonance(outcome.scan)
    assert abs(fit.omega_hat - OMEGA_L) / OMEGA_L < 1e-10
    assert fit.amplitude == pytest.approx(1.0, abs=1e-8)


def test_fit_recovers_a_displaced_resonance() -> None:
    plan = ScanPlan()
    guess = OMEGA_L + 0.5 * plan.rabi_frequency
    outcome = scan_lineshape(
        guess, plan, lambda t: OMEGA_L, substream(5, "test/scan"), noiseless=True
    )
    fit = fit_resonance(outcome.scan)
    assert abs(fit.omega_hat - OMEGA_L) / OMEGA_L < 1e-10


def test_fit_pulls_are_unit_normal() -> None:
    plan = ScanPlan()
    pulls = []
    for index in range(1000):
        rng = substream(6, "test/pulls", index)
        outcome = scan_lineshape(OMEGA_L + 3.0, plan, lambda t: OMEGA_L, rng)
        fit = fit_resonance(outcome.scan)
        pulls.append((fit.omega_hat - OMEGA_L) / fit.sigma)
    assert abs(float(np.mean(pulls))) < 0.05
    assert 0.9 < float(np.var(pulls)) < 1.1


def test_fit_needs_five_points() -> None:
    scan = LineshapeScan(
        center_guess=OMEGA_L,
        detunings=(-1.0, 0.0, 1.0, 2.0),
        shots=10,
        counts=(1, 9, 1, 0),
        rabi_frequency=157.0,
        probe_time=0.02,
    )
    with pytest.raises(DomainError):
        fit_resonance(scan)


def test_drift_process() -> None:
    linear = DriftProcess(DriftModel(linear_rate=2e-9), substream(7, "test/drift"))
    assert linear.at(10.0) == pytest.approx(2e-8, rel=1e-15)
    with pytest.raises(DomainError):
        linear.at(5.0)

    amplitude = 1e-9
    finals = [
        DriftProcess(DriftModel(random_walk_amplitude=amplitude), substream(8, "test/walk", i))
        .sample([25.0, 50.0, 100.0])[-1]
        for i in range(2000)
    ]
    assert float(np.std(finals)) == pytest.approx(amplitude * 10.0, rel=0.1)


def test_flywheel_without_drift() -> None:
    reference = [LarmorReading(t, 1e9, 1e-3) for t in (0.0, 10.0, 20.0)]
    particle = [LarmorReading(5.0, 2.5e9, 1.0), LarmorReading(15.0, 2.5e9, 1.0)]
    result = flywheel_correct(particle, reference)
    assert result.ratio == pytest.approx(2.5, rel=1e-15)
    assert result.uncorrected_ratio == pytest.approx(2.5, rel=1e-15)


def test_flywheel_removes_linear_drift() -> None:
    ratio = larmor_frequency(PROTON, 1.0) / larmor_frequency(BE9, 1.0)
    drift = DriftProcess(DriftModel(linear_rate=1e-6), substream(9, "test/drift"))
    times = np.linspace(0.0, 100.0, 11)
    fields = 1.9 + drift.sample(times)
    reference = [
        LarmorReading(float(t), larmor_frequency(BE9, float(b)), 1e-3)
        for t, b in zip(times, fields)
    ]
    particle = [
        LarmorReading(float(t), larmor_frequency(PROTON, 1.9 + 1e-6 * float(t)), 1.0)
        for t in (12.5, 47.0, 93.0)
    ]
    result = flywheel_correct(particle, reference)
    assert result.ratio == pytest.approx(ratio, rel=1e-12)
    assert abs(result.uncorrected_ratio / ratio - 1.0) > 1e-6


def test_flywheel_reduces_ratio_scatter_under_random_walk() -> None:
    ref_times = np.linspace(0.0, 100.0, 11)
    particle_times = np.array([15.0, 55.0, 95.0])
    times = np.union1d(ref_times, particle_times)
    corrected, uncorrected = [], []
    for index in range(100):
        rng = substream(11, "test/flywheel-walk", index)
        drift = DriftProcess(DriftModel(random_walk_amplitude=1e-8), rng)
        field = dict(zip(times.tolist(), (1.9 + drift.sample(times)).tolist()))
        reference = [
            LarmorReading(t, larmor_frequency(BE9, field[t]) + rng.normal(0.0, 1e-3), 1e-3)
            for t in ref_times.tolist()
        ]
        particle = [
            LarmorReading(t, larmor_frequency(PROTON, field[t]) + rng.normal(0.0, 0.1), 0.1)
            for t in particle_times.tolist()
        ]
        result = flywheel_correct(particle, reference)
        corrected.append(result.ratio)
        uncorrected.append(result.uncorrected_ratio)
    assert float(np.var(corrected)) < 0.25 * float(np.var(uncorrected))


def test_flywheel_refuses_misaligned_readings() -> None:
    reference = [LarmorReading(t, 1e9, 1e-3) for t in (0.0, 1.0, 2.0)]
    with pytest.raises(AlignmentError):
        flywheel_correct([LarmorReading(10.0, 2e9, 1.0)], reference)
    with pytest.raises(AlignmentError):
        flywheel_correct([LarmorReading(1.0, 2e9, 1.0)], [])


def test_measured_cyclotron_obeys_invariance() -> None:
    omega_c, sigma_c = measure_cyclotron(PROTON, PRECISION, 0.0, substream(10, "test/wc"))
    assert omega_c == pytest.approx(free_cyclotron_frequency(PROTON, 1.9), rel=1e-9)
    assert sigma_c == 0.0
    noisy, noisy_sigma = measure_cyclotron(PROTON, PRECISION, 1e-9, substream(10, "test/wc"))
    assert noisy_sigma > 0
    assert abs(noisy - omega_c) < 6 * noisy_sigma


def test_noiseless_campaign_closes() -> None:
    report = run_campaign(
        _campaign(noiseless=True, drift=DriftModel(linear_rate=1e-10)), seed=1
    )
    assert abs(report.g_estimate - PROTON.g_factor) / PROTON.g_factor < 1e-10
    assert len(report.cycles) == 3
    assert len(report.shots) == 3 * 11 * 50


def test_campaign_closure_over_replicas() -> None:
    cfg = _campaign()
    replicas = 100
    inside = 0
    residuals, sigmas = [], []
    for replica in range(replicas):
        report = run_campaign(cfg, seed=1000 + replica)
        residuals.append(report.g_estimate - PROTON.g_factor)
        sigmas.append(report.g_sigma)
        if abs(residuals[-1]) <= 3 * report.g_sigma:
            inside += 1
    assert inside >= 99
    assert abs(float(np.mean(residuals))) <= 0.3 * float(np.mean(sigmas)) / math.sqrt(replicas)


def test_quantum_logic_detection_is_faster_than_classical() -> None:
    quantum = run_campaign(_campaign(noiseless=True), seed=2)
    setup = ClassicalSetup(
        analysis_zone=ANALYSIS,
        noise=AxialNoiseModel(sigma0=9.2e-3, detection_time=60.0),
        cooling=CoolingModel(),
        timings=DoubleTrapTimings(10.0, 10.0, 11),
    )
    classical = run_campaign(
        _campaign(
            mode="classical_baseline",
            classical=setup,
            drift=DriftModel(),
            cycles=1,
            scan=ScanPlan(points=5, shots=1),
            noiseless=True,
        ),
        seed=2,
    )
    assert quantum.per_detection_time < 1.0
    assert classical.per_detection_time > 3600.0
    assert classical.per_detection_time > 1e3 * quantum.per_detection_time
    assert abs(classical.g_estimate - PROTON.g_factor) / PROTON.g_factor < 1e-9


def test_campaign_is_deterministic() -> None:
    cfg = _campaign(cycles=1)
    first = run_campaign(cfg, seed=42).to_dict()
    assert run_campaign(cfg, seed=42).to_dict() == first
    assert run_campaign(cfg, seed=43).to_dict() != first


def test_discriminator_duration_excludes_probe() -> None:
    assert QuantumLogicDiscriminator(SEQUENCE).duration == pytest.approx(0.01275, rel=1e-12)


def test_cpt_comparison_of_identical_moments() -> None:
    comparison = compare_cpt(
        _campaign(noiseless=True, cycles=1, drift=DriftModel(linear_rate=1e-10)), seed=3
    )
    assert comparison.antiparticle.species == "antiproton"
    assert abs(comparison.ratio) < 1e-10
    assert comparison.ratio_sigma > 0
    assert comparison.to_dict()["particle"] == "proton"
