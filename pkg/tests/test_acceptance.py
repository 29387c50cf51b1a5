"""Acceptance criteria AC1-AC10 at their stated tolerances.

Each test records one ``AC<n> PASS|FAIL: ...`` line that is echoed in the
terminal summary, then asserts.
"""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from entroflow import cli
from entroflow import functionals as fn
from entroflow import verify as vf
from entroflow.heatflow import (FlowConfig, gaussian_mixture_density, heat_kernel_closed_form,
                                kernel_density, solve_flow, trig_density)
from entroflow.lsiopt import OptProblem, minimize_w_entropy
from entroflow.space import bishop_gromov_margin, cone_half_line, laplacian_dist_sq_check


def _record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"AC{n} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def test_ac1_gaussian_saturation():
    worst = {"H": 0.0, "I": 0.0, "W_N": 0.0, "P": 0.0, "margin": 0.0}
    statuses = []
    for N in (1.0, 2.0):
        rho = heat_kernel_closed_form("euclidean", N, 0.1)
        flow = solve_flow(None, rho, [0.1, 0.25, 0.5, 1.0], FlowConfig("closed_form"))
        s = fn.evaluate_series(flow)
        t = s.t
        worst["H"] = max(worst["H"], np.max(np.abs(s.H - (N / 2) * np.log(4 * np.pi * np.e * t))))
        worst["I"] = max(worst["I"], np.max(np.abs(s.I - N / (2 * t))))
        worst["W_N"] = max(worst["W_N"], np.max(np.abs(s.W_N)))
        # entropy power exp(2H/N) equals 4 pi e t on R^N
        P = s.entropy_power
        worst["P"] = max(worst["P"], np.max(np.abs(P - 4 * np.pi * np.e * t) / P))
        for res in (vf.check_edi(flow, 0.0, series=s), vf.check_li_yau(flow, 1.0),
                    vf.check_fisher_bound(flow, series=s)):
            statuses.append(res.status)
            worst["margin"] = max(worst["margin"], abs(res.worst_margin))
    ok = (worst["H"] <= 1e-8 and worst["I"] <= 1e-8 and worst["W_N"] <= 1e-7
          and worst["P"] <= 1e-6 and worst["margin"] <= 1e-6
          and all(st == "pass" for st in statuses))
    _record(1, ok, "Gaussian saturation " + ", ".join(f"{k}={v:.2e}" for k, v in worst.items()))


def _cone_tI_error(n):
    sp = cone_half_line(2, n, 10.0)
    flow = solve_flow(sp, kernel_density(sp), np.geomspace(0.05, 0.5, 41))
    s = fn.evaluate_series(flow, N=2.0)
    return float(np.max(np.abs(s.t * s.I - 1.0))), s, flow


def test_ac2_cone_rigidity(cone_flow, cone_space):
    s = fn.evaluate_series(cone_flow, N=2.0)
    err = float(np.max(np.abs(s.t * s.I - 1.0)))
    w_range = float(np.ptp(s.W_N))
    lap = laplacian_dist_sq_check(cone_space, cone_space.center)
    bg = max(abs(bishop_gromov_margin(cone_space, 0.0, r, R)) for r, R in vf.BG_PAIRS)
    scan = vf.rigidity_scan(cone_flow, series=s)
    err_fine, _, _ = _cone_tI_error(4001)
    ratio = err / err_fine
    ok = (err <= 1e-3 and w_range <= 2e-3 and lap <= 1e-3 and bg <= 1e-4
          and scan.status == "RIGID" and 3.5 <= ratio <= 4.5)
    _record(2, ok, f"cone |tI-1|={err:.2e} W_range={w_range:.2e} lap_dev={lap:.2e} "
                   f"bg={bg:.2e} scan={scan.status} halving ratio={ratio:.2f}")


def test_ac3_flat_circle(circle_flow):
    s = fn.evaluate_series(circle_flow, N=1.0)
    edi = vf.check_edi(circle_flow, 0.0, 1.0, series=s)
    wm = vf.check_w_monotone(circle_flow, "W_N", 0.0, 1.0, series=s)
    pc = vf.check_entropy_power_concavity(circle_flow, 0.0, 1.0, series=s)
    d = s.derivatives
    r1 = float(np.max(d.dH_residual()[d.interior]))
    r2 = float(np.max(d.d2H_residual()[d.interior]))
    ok = all(r.status == "pass" for r in (edi, wm, pc)) and r1 <= 1e-4 and r2 <= 1e-3
    _record(3, ok, f"circle edi={edi.worst_margin:.3g} w_monotone={wm.worst_margin:.3g} "
                   f"concavity={pc.worst_margin:.3g} H' route={r1:.1e} H'' route={r2:.1e}")


def test_ac4_positive_curvature(sphere_flow):
    s = fn.evaluate_series(sphere_flow, N=2.0, K=1.0)
    edi = vf.check_edi(sphere_flow, 1.0, 2.0, series=s)
    fb = vf.check_fisher_bound(sphere_flow, 1.0, 2.0, time_window=(0.1, 2.0), series=s)
    wnk = vf.check_w_monotone(sphere_flow, "W_NK", 1.0, 2.0, series=s)
    d = s.derivatives
    m = d.interior
    dec = float(np.max(np.abs(s.dW_NK_terms[m] - d.dW_NK[m]) / np.abs(d.dW_NK[m])))
    ok = (edi.status == "pass" and fb.status == "pass" and fb.worst_margin > 0
          and wnk.status == "pass" and dec <= 1e-3)
    _record(4, ok, f"sphere edi={edi.worst_margin:.3g} fisher={fb.worst_margin:.3g} "
                   f"W_NK={wnk.worst_margin:.3g} decomposition rel={dec:.1e}")


def test_ac5_niw_identity(circle_flow, cone_flow):
    g_flow = solve_flow(None, heat_kernel_closed_form("euclidean", 2.0, 0.05),
                        np.geomspace(0.05, 1.0, 81), FlowConfig("closed_form"))
    res = {"gaussian": vf.check_niw_identity(g_flow, 0.0),
           "cone": vf.check_niw_identity(cone_flow, 0.0, 2.0),
           "circle": vf.check_niw_identity(circle_flow, 0.0, 1.0)}
    ok = all(r.status == "pass" for r in res.values())
    _record(5, ok, "NIW " + ", ".join(f"{k}={r.worst_margin:.2e} ({r.status})"
                                      for k, r in res.items()))


def test_ac6_stam_sharpness(line_space, cone_space, cone_flow):
    g = gaussian_mixture_density(line_space, [[1.0, 0.0, 0.5]])
    mix = gaussian_mixture_density(line_space, [[0.5, -2.0, 0.5], [0.5, 2.0, 0.5]])
    rg = vf.check_stam_lsi(g, 1.0, 1.0)
    rm = vf.check_stam_lsi(mix, 1.0, 1.0)
    est = vf.volume_ratio_kappa(cone_space)
    gam = vf.stam_constant(2.0, est.kappa)
    k = int(np.argmin(np.abs(cone_flow.times - 0.1)))
    rc = vf.check_stam_lsi(cone_flow.densities[k], 2.0)
    IP = rc.details["I_times_P"]
    ok = (abs(rg.worst_margin) <= 1e-6 and rm.worst_margin > 0.05
          and abs(est.kappa - 1 / (2 * math.pi)) <= 1e-3
          and abs(IP - 2 * math.e) <= 1e-3 and abs(gam - 2 * math.e) <= 1e-3)
    _record(6, ok, f"Stam line Gaussian={rg.worst_margin:.1e} mixture={rm.worst_margin:.3f} "
                   f"cone kappa={est.kappa:.8f} I*P={IP:.8f} gamma_2={gam:.8f}")


def test_ac7_lsi_optimizer(line_space):
    t0 = time.perf_counter()
    r = minimize_w_entropy(OptProblem(line_space, 1.0, 0.0, 0.25))
    elapsed = time.perf_counter() - t0
    # variance 2t Gaussian in the density of dx
    x = line_space.nodes
    gauss = np.exp(-x**2 / (4 * 0.25)) / math.sqrt(4 * math.pi * 0.25)
    sup = float(np.max(np.abs(r.minimizer.values - gauss)))
    ok = (abs(r.mu_value) <= 2e-2 and r.el_residual <= 1e-4 and sup <= 1e-2
          and elapsed <= 120 and r.converged)
    _record(7, ok, f"LSI mu={r.mu_value:.3e} EL={r.el_residual:.1e} sup={sup:.1e} "
                   f"iters={r.iterations} time={elapsed:.3f}s")


def test_ac8_solver_cross_validation(circle_space):
    rho0 = trig_density(circle_space, [0.7, 0.2], [0.0, 0.1])
    times = [0.01, 0.1, 1.0]
    sp = solve_flow(circle_space, rho0, times, FlowConfig("spectral", modes=254))
    cn = solve_flow(circle_space, rho0, times, FlowConfig("cn", dt=1e-3))
    sup = float(np.max(np.abs(sp.densities[-1].values - cn.densities[-1].values)))
    drift_sp = float(np.max(sp.diagnostics["mass_drift"]))
    drift_cn = float(np.max(cn.diagnostics["mass_drift"]))
    # 1000 CN steps reach t = 1
    ok = sup <= 1e-4 and drift_sp <= 1e-10 and drift_cn <= 1e-8
    _record(8, ok, f"spectral vs CN sup={sup:.1e} drift spectral={drift_sp:.1e} "
                   f"CN={drift_cn:.1e}")


def test_ac9_negative_control(circle_flow, tmp_path):
    res = vf.check_edi(circle_flow, 1.0, 1.0)
    code = cli.main(["verify", "--scenario", "circle_negative", "--out", str(tmp_path)])
    ok = res.status == "fail" and res.worst_margin <= -0.01 and code == cli.EXIT_FAIL
    _record(9, ok, f"EDI(K=1) on the flat circle margin={res.worst_margin:.4f} "
                   f"status={res.status} exit={code}")


def test_ac10_transport(line_space, circle_flow, circle_partner_flow, sphere_flow,
                        sphere_partner_flow):
    a = kernel_density(line_space, 0.3, center=-1.25)
    b = kernel_density(line_space, 0.3, center=2.0)
    trans = abs(vf.w2_distance_1d(a, b) - 3.25)
    t1, t2 = 0.25, 1.0
    var = abs(vf.w2_distance_1d(kernel_density(line_space, t1), kernel_density(line_space, t2))
              - abs(math.sqrt(2 * t1) - math.sqrt(2 * t2)))
    statuses = []
    for pair, K, N in (((circle_flow, circle_partner_flow), 0.0, 1.0),
                       ((sphere_flow, sphere_partner_flow), 1.0, 2.0)):
        for t in (0.1, 1.0):
            tk = float(pair[0].times[np.argmin(np.abs(pair[0].times - t))])
            statuses.append(vf.check_hwi_type(pair, tk).status)
            statuses.append(vf.check_eks_distortion(pair, tk, K, N).status)
    ok = trans <= 1e-8 and var <= 1e-5 and all(st == "pass" for st in statuses)
    _record(10, ok, f"W2 translation err={trans:.1e} variance err={var:.1e} "
                    f"HWI/EKS {statuses.count('pass')}/{len(statuses)} pass")
