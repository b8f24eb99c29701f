import math
import pathlib

import numpy as np
import pytest

import pode

DATA = pathlib.Path(__file__).resolve().parents[2] / "data"


def toy():
    links = [pode.Link("1", "r", "s", 10, 360), pode.Link("2", "r", "s", 10, 360)]
    net = pode.Network(links, [("r", "s")])
    return net, pode.build_incidence(net, [[[0], [1]]])


def test_toy_moments():
    net, ps = toy()
    rc = pode.make_route_choice(ps, np.array([0.5, 0.5]))
    fd = pode.flow_distribution(ps, rc, pode.DemandDistribution(np.array([100.0]), np.array([[300.0]])))
    assert np.allclose(fd.x, [50, 50])
    assert fd.sigma_x[0, 0] == pytest.approx(100)
    assert fd.sigma_x[0, 1] == pytest.approx(50)


def test_synthesize_and_estimate():
    net, ps = toy()
    truth = pode.DemandDistribution(np.array([100.0]), np.array([[300.0]]))
    rc = pode.make_route_choice(ps, np.array([0.5, 0.5]))
    obs = pode.synthesize(net, ps, truth, rc, 400, seed=2)
    assert obs.counts.shape == (400, 2)
    cfg = pode.IGLSConfig()
    cfg.equilibrium.model = pode.ChoiceModel.Logit
    r = pode.run_igls(net, ps, obs, cfg)
    assert r.converged
    assert abs(r.q_hat[0] - 100) < 5
    assert pode.prmse(r.q_hat, truth.mean) < 5
    assert math.isfinite(pode.kl_od(r.q_hat, r.sigma_q_hat, truth.mean, truth.cov))


def test_lasso_zero_above_lambda_max():
    net, ps = toy()
    rc = pode.make_route_choice(ps, np.array([0.5, 0.5]))
    problem = pode.make_cov_problem(np.array([[100.0, 50], [50, 100]]), ps, rc, np.array([100.0]))
    cfg = pode.LassoConfig()
    cfg.lambda_ = 1.01 * pode.lambda_max(problem)
    assert pode.solve_sigma_q(problem, cfg).nnz == 0
    cfg.lambda_ = 0.0
    assert pode.solve_sigma_q(problem, cfg).sigma_q_hat[0, 0] == pytest.approx(300, rel=1e-6)


def test_decomposition_and_errors():
    net, ps = toy()
    rc = pode.make_route_choice(ps, np.array([0.5, 0.5]))
    vd = pode.variance_decomposition(ps, rc, np.array([100.0]), np.array([[300.0]]))
    assert vd.demand_share[0] == pytest.approx(0.75)
    assert vd.route_share[0] == pytest.approx(0.25)
    with pytest.raises(pode.InputError):
        pode.prmse(np.array([1.0]), np.array([0.0]))
    with pytest.raises(pode.InputError, match="nope.csv"):
        pode.read_network_csv("nope.csv", "od.csv")


def test_three_link_config(tmp_path):
    written = pode.cmd_synthesize(str(DATA / "three_link" / "run.ini"), out=str(tmp_path), seed=4)
    assert any(str(p).endswith("observations.csv") for p in written)
    lines = (tmp_path / "observations.csv").read_text().splitlines()
    assert len(lines) == 501
