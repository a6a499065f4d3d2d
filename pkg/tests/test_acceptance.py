"""Acceptance gate: one test (and one printed PASS/FAIL line) per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  The heavyweight desk-scale benchmark (criterion 9) runs once as a
module fixture and is reused by the summary-shape sanity check.
"""

import math
import time

import numpy as np
import pytest

from cisum.bench import (ExperimentConfig, ScenarioTemplate,
                         default_experiment_config, paper_table_repro,
                         read_summary_csv, read_trials_csv, run_experiment,
                         write_summary_csv, write_trials_csv)
from cisum.bounds import (crb_audit, crb_numerical, crb_omega_closed,
                          crb_phi_closed, crb_phi_closed_approx,
                          crb_sigma_closed, crb_single_tone, fim_full,
                          jacobian_sum_params, single_tone_omega_bound)
from cisum.estimators import (egem_estimate, root_music_estimate,
                              zoom_ipfft_estimate)
from cisum.signals import (Cisoid, CisoidEnsemble, NoiseModel, ScenarioConfig,
                           ground_truth_sum_params, random_ensemble,
                           synthesize)
from cisum.spectrum import (blackman_harris_4, noise_floor_estimate,
                            periodogram)

from .conftest import make_ensemble, random_test_ensemble
from .test_bounds import fd_jacobian


def report(num: int, ok: bool, detail: str):
    print(f"\n[criterion {num:02d}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def desk_bench(tmp_path_factory):
    """Desk-scale benchmark grid (200 trials/cell), run once."""
    config = default_experiment_config(trials=200)
    tic = time.perf_counter()
    records, summary = run_experiment(config, jobs=1)
    elapsed = time.perf_counter() - tic
    out = tmp_path_factory.mktemp("bench")
    write_trials_csv(records, out / "trials.csv")
    write_summary_csv(summary, out / "summary.csv")
    return config, records, summary, elapsed, out


def test_c01_jacobian_matches_finite_differences():
    rng = np.random.default_rng(42)
    tic = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        ens = random_test_ensemble(rng)
        exact = jacobian_sum_params(ens).entries
        approx = fd_jacobian(ens)
        scale = max(1.0, float(np.abs(exact).max()))
        worst = max(worst, float(np.max(np.abs(exact - approx))) / scale)
    elapsed = time.perf_counter() - tic
    report(1, worst <= 1e-6 and elapsed < 5.0,
           f"max relative deviation {worst:.2e} over 100 ensembles "
           f"(limit 1e-6), {elapsed:.2f}s (limit 5s)")


def test_c02_fim_structure():
    rng = np.random.default_rng(43)
    sym_ok = psd_ok = True
    for _ in range(100):
        ens = random_test_ensemble(rng)
        f = fim_full(ens, 0.9, 40).entries
        sym_ok &= bool(np.allclose(f, f.T, rtol=1e-12))
        eig = np.linalg.eigvalsh(f)
        psd_ok &= bool(eig[0] >= -1e-9 * eig[-1])
    hand = fim_full(CisoidEnsemble((Cisoid(1.0, 0.0, 0.0),), 1.0), 2.0, 2).entries
    hand_dev = max(abs(hand[0, 0] - 2.0), abs(hand[1, 1] - 1.0),
                   abs(hand[2, 2] - 2.0), abs(hand[1, 2] - 1.0))
    report(2, sym_ok and psd_ok and hand_dev <= 1e-10,
           f"symmetric/PSD on 100 ensembles: {sym_ok}/{psd_ok}; "
           f"hand-case deviation {hand_dev:.2e} (limit 1e-10)")


def test_c03_single_tone_identity():
    # the classical formula's sigma2 is the per-quadrature noise variance;
    # with this package's total-variance convention the matching closed
    # form is evaluated at sigma2/2 (see README on conventions)
    worst = 0.0
    for n in (16, 128, 1024):
        for sigma2, a, ts in ((1.0, 1.0, 1.0), (0.25, 3.0, 0.001)):
            numeric = single_tone_omega_bound(a, ts, sigma2, n)
            classical = crb_single_tone(sigma2 / 2.0, a, ts, n)
            worst = max(worst, abs(numeric / classical - 1.0))
    report(3, worst <= 1e-8,
           f"max relative deviation from the classical single-tone bound "
           f"{worst:.2e} over N in {{16,128,1024}} (limit 1e-8)")


def test_c04_closed_form_worked_values():
    ok = (crb_sigma_closed(1.0, 2.0) == 0.25
          and crb_omega_closed(1.0, 1.0, 1.0, 100) == 12.0 / 999900.0
          and abs(crb_omega_closed(1.0, 1.0, 1.0, 100) / 1.20012e-5 - 1) < 1e-5
          and crb_phi_closed(1.0, 1.0, 100) == 402.0 / 10100.0
          and abs(crb_phi_closed(1.0, 1.0, 100) / 0.039802 - 1) < 1e-4
          and crb_phi_closed_approx(1.0, 1.0, 100) == 0.04)
    report(4, ok, "worked values 0.25, 1.20012e-5, 0.039802 reproduced as "
                  "rational evaluations")


def test_c05_audit_report_on_benchmark_scenario():
    cfg = ScenarioConfig(k=12, freq_range=(0.05, 0.45),
                         amp_dynamic_range_db=40.0, n=2000, snr_db=20.0,
                         seed=2024)
    ens = random_ensemble(cfg)
    rep1 = crb_audit(ens, 1.0, 2000)
    rep2 = crb_audit(ens, 1.0, 2000)
    complete = (set(rep1.ratios) == {"sigma_sum", "omega_sum", "phi_sum"}
                and rep1.separation_metric is not None
                and rep1.numerical.shape == (4, 4))
    deterministic = rep1.to_json() == rep2.to_json()
    report(5, complete and deterministic,
           f"ratios {{sigma: {rep1.ratios['sigma_sum']:.3e}, "
           f"omega: {rep1.ratios['omega_sum']:.3e}, "
           f"phi: {rep1.ratios['phi_sum']:.3e}}}, separation "
           f"{rep1.separation_metric:.1f}; deterministic={deterministic} "
           "(ratio != 1 expected; deviation report is the deliverable)")


def test_c06_noiseless_consistency():
    # single tone
    ens1 = make_ensemble([0.3], [1.0], [math.pi / 4])
    th1 = ground_truth_sum_params(ens1)
    r1 = egem_estimate(synthesize(ens1, 1024, NoiseModel(0.0)))
    e1 = max(abs(r1.theta_hat.sigma_sum - th1.sigma_sum) / th1.sigma_sum,
             abs(r1.theta_hat.omega_sum - th1.omega_sum) / abs(th1.omega_sum),
             abs(r1.theta_hat.phi_sum - th1.phi_sum) / abs(th1.phi_sum))
    # three well-separated tones (gaps >= 16/N)
    n = 1024
    ens3 = make_ensemble([0.2, 0.2 + 16.0 / n, 0.2 + 33.5 / n],
                         [1.0, 0.5, 0.25], [0.3, -1.2, 2.0])
    th3 = ground_truth_sum_params(ens3)
    r3 = egem_estimate(synthesize(ens3, n, NoiseModel(0.0)))
    e3 = max(abs(r3.theta_hat.sigma_sum - th3.sigma_sum) / th3.sigma_sum,
             abs(r3.theta_hat.omega_sum - th3.omega_sum) / abs(th3.omega_sum),
             abs(r3.theta_hat.phi_sum - th3.phi_sum) / abs(th3.phi_sum))
    # baselines on their noiseless cases
    ensb = make_ensemble([64.0 / 256], [1.0], [0.7])
    thb = ground_truth_sum_params(ensb)
    rb = zoom_ipfft_estimate(synthesize(ensb, 256, NoiseModel(0.0)))
    eb = abs(rb.theta_hat.omega_sum - thb.omega_sum) / abs(thb.omega_sum)
    ensr = make_ensemble([0.1, 0.22, 0.4], [1.0, 0.6, 0.3], [0.5, -0.5, 1.5])
    thr = ground_truth_sum_params(ensr)
    rr = root_music_estimate(synthesize(ensr, 512, NoiseModel(0.0)), 3)
    er = abs(rr.theta_hat.omega_sum - thr.omega_sum) / abs(thr.omega_sum)
    ok = e1 <= 1e-6 and e3 <= 0.01 and eb <= 1e-4 and er <= 1e-6
    report(6, ok,
           f"noiseless errors: egem K=1 {e1:.2e} (limit 1e-6), egem K=3 "
           f"{e3:.2e} (limit 1e-2), ipfft {eb:.2e} (limit 1e-4), "
           f"rootmusic {er:.2e} (limit 1e-6)")


def test_c07_bound_respecting_variance():
    n, sigma2, trials = 512, 1e-4, 200
    tic = time.perf_counter()
    errors = []
    for t in range(trials):
        phase = np.random.default_rng(3000 + t).uniform(-math.pi, math.pi)
        ens = CisoidEnsemble((Cisoid(1.0, 2 * math.pi * 0.2, phase),), 1.0)
        sig = synthesize(ens, n, NoiseModel(sigma2), seed=500 + t)
        r = egem_estimate(sig)
        errors.append(r.theta_hat.omega_sum - 2 * math.pi * 0.2)
    elapsed = time.perf_counter() - tic
    var = float(np.var(errors, ddof=1))
    ens = CisoidEnsemble((Cisoid(1.0, 2 * math.pi * 0.2, 0.0),), 1.0)
    bound = float(crb_numerical(ens, sigma2, n)[1, 1])
    band = bound * 3.0 * math.sqrt(2.0 / (trials - 1))
    ok = var >= bound - band and elapsed < 60.0
    report(7, ok,
           f"sample variance {var:.3e} vs oracle bound {bound:.3e} "
           f"(ratio {var / bound:.2f}, 3-sigma band {band:.1e}); "
           f"{elapsed:.1f}s (limit 60s)")


def test_c08_frequency_sum_scaling_law():
    # zero-carrier tone isolates the cubic frequency-information law: at a
    # nonzero carrier the bound's amplitude-sensitivity term (prop. to 1/N)
    # dominates and no estimator can show the N^-3 variance scaling
    snr_db, trials = 30.0, 200
    sigma2 = 10 ** (-snr_db / 10.0)
    rmses = []
    ns = (500, 1000, 2000, 4000)
    for n in ns:
        errs = []
        for t in range(trials):
            phase = np.random.default_rng(7000 + t).uniform(-math.pi, math.pi)
            ens = CisoidEnsemble((Cisoid(1.0, 0.0, phase),), 1.0)
            sig = synthesize(ens, n, NoiseModel(sigma2), seed=800 + t)
            r = egem_estimate(sig)
            errs.append(r.theta_hat.omega_sum)
        rmses.append(float(np.sqrt(np.mean(np.square(errs)))))
    slope = float(np.polyfit(np.log(ns), np.log(rmses), 1)[0])
    ok = abs(slope + 1.5) <= 0.3
    report(8, ok, f"log-log RMSE slope {slope:.3f} vs -1.5 +- 0.3 "
                  f"(RMSEs {['%.2e' % r for r in rmses]})")


def test_c09_desk_scale_claims(desk_bench):
    config, records, summary, elapsed, out = desk_bench
    rep = paper_table_repro(summary)
    rep_again = paper_table_repro(summary)
    (out / "claims.txt").write_text(rep.to_text())

    ids = [r.claim_id for r in rep.rows]
    all_rows = ids == ["near_bound", "n2000_snr20", "vs_ipfft",
                       "vs_rootmusic", "short_sample"]
    all_evaluated = all(r.evaluated for r in rep.rows)
    deterministic = rep.to_text() == rep_again.to_text()

    egem20 = [r for r in summary if (r.n, r.snr_db, r.method, r.parameter)
              == (2000, 20.0, "egem", "omega_sum")][0]
    ipfft20 = [r for r in summary if (r.n, r.snr_db, r.method, r.parameter)
               == (2000, 20.0, "ipfft", "omega_sum")][0]
    beats_baseline = egem20.nrmse <= ipfft20.nrmse

    ok = (all_rows and all_evaluated and deterministic and beats_baseline
          and elapsed < 900.0)
    report(9, ok,
           f"egem NRMSE {egem20.nrmse:.3f} <= ipfft {ipfft20.nrmse:.3f} at "
           f"(N=2000, 20dB): {beats_baseline}; all claim rows: {all_rows}; "
           f"deterministic: {deterministic}; bench {elapsed:.0f}s "
           f"(limit 900s)")


def test_c10_determinism_and_schema(tmp_path):
    config = ExperimentConfig(
        n_values=(64, 125), k=2, snr_grid_db=(10.0, 30.0), trials=3,
        base_seed=777, scenario=ScenarioTemplate(min_separation=0.02))
    outputs = []
    for i, jobs in enumerate((1, 2, 1)):
        records, summary = run_experiment(config, jobs=jobs)
        t = tmp_path / f"t{i}.csv"
        s = tmp_path / f"s{i}.csv"
        write_trials_csv(records, t)
        write_summary_csv(summary, s)
        outputs.append((t.read_bytes(), s.read_bytes()))
    identical = outputs[0] == outputs[1] == outputs[2]
    back_t = read_trials_csv(tmp_path / "t0.csv")
    back_s = read_summary_csv(tmp_path / "s0.csv")
    reparse = (len(back_t) == len(config.n_values) * len(config.snr_grid_db)
               * config.trials * len(config.methods)
               and len(back_s) == len(config.n_values)
               * len(config.snr_grid_db) * len(config.methods) * 4)
    report(10, identical and reparse,
           f"identical bytes across (jobs=1, jobs=2, jobs=1): {identical}; "
           f"outputs re-parse through the package readers: {reparse}")


def test_c11_window_and_spectrum_checks():
    # peak sidelobe of the 4-term window, 8x zero-padded transform
    w = blackman_harris_4(1024)
    mag = np.abs(np.fft.fft(w, 8 * 1024))[:4096]
    db = 20 * np.log10(mag / mag[0] + 1e-300)
    i = 1
    while db[i] < db[i - 1]:
        i += 1
    sidelobe = float(db[i:].max())

    # absolute noise calibration over 4096 bins
    from cisum.signals import complex_noise, SampledSignal
    x = complex_noise(4096, 1.0, seed=7)
    pg = periodogram(SampledSignal(x, 1.0), "rectangular", 1)
    cal_err = abs(float(pg.power.mean()) - 1.0)

    # noise floor on the 12-tone benchmark scenario
    cfg = ScenarioConfig(k=12, freq_range=(0.05, 0.45),
                         amp_dynamic_range_db=40.0, n=4096, snr_db=20.0,
                         seed=5)
    ens = random_ensemble(cfg)
    sig = synthesize(ens, 4096, NoiseModel(1.0), seed=6)
    floor = noise_floor_estimate(periodogram(sig, "blackman_harris_4", 1))
    floor_err = abs(floor - 1.0)

    ok = sidelobe <= -92.0 and cal_err <= 0.05 and floor_err <= 0.15
    report(11, ok,
           f"sidelobe {sidelobe:.2f} dB (limit -92); noise calibration "
           f"error {cal_err:.3f} (limit 0.05); 12-tone floor error "
           f"{floor_err:.3f} (limit 0.15)")


def test_fig1_shape_sanity(desk_bench):
    """Summary-shape sanity: egem frequency-sum NRMSE is non-increasing in
    SNR (>= 5 dB, 10% slack) at the largest record length.

    Scoped to the global method: the two baselines have documented error
    floors, so their normalized error can legitimately grow with SNR.
    """
    _, _, summary, _, _ = desk_bench
    rows = sorted((r for r in summary
                   if r.method == "egem" and r.parameter == "omega_sum"
                   and r.n == 2000 and r.snr_db >= 5.0),
                  key=lambda r: r.snr_db)
    values = [r.nrmse for r in rows]
    assert all(b <= a * 1.10 for a, b in zip(values, values[1:])), values
