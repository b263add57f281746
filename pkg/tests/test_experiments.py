import json

import numpy as np
import pytest

from conftest import random_state
from spinchaos.control import fidelity, propagate_piecewise
from spinchaos.dynamics import random_product_state
from spinchaos.exceptions import ConfigError, GridPointError
from spinchaos.experiments import (
    ControlSettings,
    SweepSpec,
    format_value,
    log2_slope,
    run_control_sweep,
    run_eta_sweep,
    run_fluctuation_scaling,
    run_purity_sweep,
    run_temperature_sweep,
    single_trajectory_fluctuations,
    STATES,
)
from spinchaos.operators import SpinModel
from spinchaos.seeding import child_seed, stream
from spinchaos.spectral import SectorPolicy


def _spec(**kw):
    base = dict(model=SpinModel.ising(3), param="h_z", grid=(0.1, 0.6, 1.2),
                realizations=4, T=5.0, seed=0)
    base.update(kw)
    return SweepSpec(**base)


def test_purity_sweep_rows_and_normalization():
    res = run_purity_sweep(_spec())
    assert res.columns == ("param", "mean_purity", "std_purity", "purity_norm", "eta",
                           "one_minus_eta")
    assert np.array_equal(res.column("param"), [0.1, 0.6, 1.2])
    norm = res.column("purity_norm")
    assert norm.min() == 0 and norm.max() == 1
    assert res.meta["seed"] == 0 and len(res.meta["config_hash"]) == 64
    assert "numpy" in res.meta["versions"]


def test_single_point_grid_emits_raw_mean():
    res = run_purity_sweep(_spec(grid=(0.5,)))
    assert len(res.rows) == 1
    assert res.rows[0][1] is not None and res.rows[0][3] is None
    assert res.meta["degenerate_range"]
    assert res.to_csv().splitlines()[1].endswith("NA,NA,NA")


def test_determinism_and_grid_independence():
    a = run_purity_sweep(_spec())
    b = run_purity_sweep(_spec(workers=2))
    assert a.to_csv() == b.to_csv()
    # a point's raw mean does not depend on which other points are present
    c = run_purity_sweep(_spec(grid=(0.6, 2.0)))
    assert c.rows[0][1] == a.rows[1][1]


def test_eta_column_and_sweep():
    spec = _spec(eta_length=6)
    res = run_purity_sweep(spec)
    eta = res.column("eta")
    assert np.allclose(res.column("one_minus_eta"), 1 - eta)
    e = run_eta_sweep(spec)
    assert np.array_equal(e.column("eta"), eta)
    assert np.all(e.column("n_levels") == 28)


def test_eta_sweep_needs_length():
    with pytest.raises(ConfigError):
        run_eta_sweep(_spec())


def test_symmetry_policy_errors():
    with pytest.raises(ConfigError):
        run_eta_sweep(_spec(model=SpinModel.ising(3, couplings=[1.0, 2.0]), eta_length=4))
    with pytest.raises(ConfigError):
        run_eta_sweep(_spec(eta_length=4, sector=SectorPolicy("odd", 2)))
    with pytest.raises(ConfigError):
        run_eta_sweep(_spec(model=SpinModel.heisenberg(3, 1.0), param="h", eta_length=4))


def test_spec_validation():
    with pytest.raises(ConfigError):
        _spec(grid=())
    with pytest.raises(ConfigError):
        _spec(grid=(0.5, 0.1))
    with pytest.raises(ConfigError):
        _spec(realizations=0)
    with pytest.raises(ConfigError):
        _spec(param="theta")
    with pytest.raises(ConfigError):
        _spec(random_couplings=(2.0, 1.0))
    with pytest.raises(ConfigError):
        ControlSettings(protocol="teleport")


def test_random_couplings_drawn_once_per_sweep():
    from spinchaos.experiments import dynamics_model
    spec = _spec(random_couplings=(0.5, 1.5))
    a, b = dynamics_model(spec, 0.1), dynamics_model(spec, 1.2)
    assert np.array_equal(a.couplings, b.couplings)
    assert not a.uniform_couplings


def test_failed_grid_point_is_located():
    # heisenberg at L=1 cannot be built: the failure names the grid point
    spec = _spec(model=SpinModel.ising(2), param="L", grid=(2, 30))
    seen = []
    with pytest.raises(GridPointError) as info:
        run_fluctuation_scaling(spec, progress=lambda i, v: seen.append(i))
    assert info.value.index == 1 and seen == [0]


def test_fluctuations_single_realization_matches_direct():
    spec = _spec(param="L", grid=(3, 4), realizations=1, T=10.0, window=(5.0, 10.0))
    res = run_fluctuation_scaling(spec)
    for L, row in zip((3, 4), res.rows):
        psi0 = random_product_state(L, stream(child_seed(0, STATES), 0))
        direct = single_trajectory_fluctuations(SpinModel.ising(L), psi0, (5.0, 10.0), 0.1)
        assert np.allclose(row[1:], direct)
    assert set(res.meta["log2_slopes"]) == {"delta_purity", "delta_rx", "delta_ry", "delta_rz"}


def test_log2_slope():
    assert log2_slope([4, 6, 8], [2**-2, 2**-3, 2**-4]) == pytest.approx(-0.5)


def test_control_sweep_small():
    spec = _spec(model=SpinModel.ising(2), grid=(0.01, 0.8), eta_length=4,
                 control=ControlSettings(T=3.0, n_ts=3, n_seeds=1, maxiter=20))
    res = run_control_sweep(spec)
    F = res.column("best_fidelity")
    assert np.all((F >= res.column("zero_field_fidelity") - 1e-12) & (F <= 1))
    assert "spearman_eta_fidelity" in res.meta
    one = run_control_sweep(_spec(model=SpinModel.ising(2), grid=(0.3,),
                                  control=ControlSettings(T=3.0, n_ts=3, n_seeds=1)))
    assert len(one.rows) == 1 and one.rows[0][-1] is None


def test_temperature_sweep_shape():
    res = run_temperature_sweep(_spec(grid=(0.3,), betas=(0.0,)))
    assert len(res.rows) == 1
    res = run_temperature_sweep(_spec(betas=(0.0, 2.0)))
    assert len(res.rows) == 6
    assert list(res.column("beta")) == [0.0] * 3 + [2.0] * 3
    with pytest.raises(ConfigError):
        run_temperature_sweep(_spec(model=SpinModel.heisenberg(3, 1.0), param="h"))


def test_format_value():
    assert format_value(None) == "NA"
    assert format_value(float("nan")) == "NA"
    assert format_value(3) == "3"
    assert format_value(0.0) == "0.00000000000"
    assert format_value(1.0) == "1.00000000000"
    assert format_value(1 / 3) == "0.333333333333"
    assert format_value(9.99999999999996) == "10.0000000000"
    assert format_value(123456.789) == "123456.789000"
    assert format_value(1e-7) == "0.000000100000000000"
    assert "e" not in format_value(2.5e-9)


def test_config_hash_ignores_workers():
    assert _spec().config_hash() == _spec(workers=3).config_hash()
    assert _spec().config_hash() != _spec(seed=1).config_hash()
    json.dumps(_spec().to_dict())
