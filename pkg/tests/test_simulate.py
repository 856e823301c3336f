import numpy as np
import pytest

from hierh2 import (ClusterPartition, GeneralizedPlant, NetworkSpec,
                    StateSpace, WeightVectors, build_projection,
                    communication_links, generate_consensus_network,
                    lft_lower, privacy_audit, run_hier_simulation,
                    solve_lyapunov, synthesize_hierarchical)
from hierh2.errors import UnstableClosedLoop
from hierh2.synthesis import HierarchicalController


def line_graph_plant():
    """Example topology: four subsystems on a line, scalar states, outputs
    everywhere but control only on the first three."""
    lap = np.array([
        [1.0, -1.0, 0.0, 0.0],
        [-1.0, 2.0, -1.0, 0.0],
        [0.0, -1.0, 2.0, -1.0],
        [0.0, 0.0, -1.0, 1.0],
    ])
    a = -lap - 0.1 * np.eye(4)
    b2 = np.zeros((4, 3))
    b2[0, 0] = b2[1, 1] = b2[2, 2] = 1.0
    from hierh2 import Subsystem
    subsystems = (
        Subsystem(states=(0,), inputs=(0,), outputs=(0,)),
        Subsystem(states=(1,), inputs=(1,), outputs=(1,)),
        Subsystem(states=(2,), inputs=(2,), outputs=(2,)),
        Subsystem(states=(3,), inputs=(), outputs=(3,)),
    )
    return GeneralizedPlant(
        a=a,
        b1=np.hstack([np.eye(4), np.zeros((4, 4))]),
        b2=b2,
        c1=np.vstack([np.eye(4), np.zeros((3, 4))]),
        c2=np.eye(4),
        d12=np.vstack([np.zeros((4, 3)), np.eye(3)]),
        d21=np.hstack([np.zeros((4, 4)), np.eye(4)]),
        subsystems=subsystems)


def line_graph_partition():
    return ClusterPartition(
        input_sets=((0, 1), (2,)),
        output_sets=((0, 1), (2, 3)),
        subsystem_sets=((0, 1), (2, 3)))


def test_static_controller_three_step_identity():
    g = line_graph_plant()
    part = line_graph_partition()
    pair = build_projection(part, WeightVectors.ones(3, 4))
    k_tilde = StateSpace.static([[-0.2, 0.1], [0.0, -0.3]])
    controller = HierarchicalController(p_u=pair.p_u, k_tilde=k_tilde,
                                        p_y=pair.p_y)
    res = run_hier_simulation(g, controller, horizon=2.0,
                              disturbance=("noise", 3, 1.0), partition=part)
    gain = pair.p_u.T @ k_tilde.d @ pair.p_y
    for i in range(len(res.times)):
        assert np.allclose(res.u[i], gain @ res.y[i], atol=1e-12)
    assert res.staged_vs_monolithic <= 1e-9
    assert privacy_audit(res.trace)
    assert res.trace.links_used == communication_links(part).hierarchical


def test_zero_disturbance_zero_state():
    g = line_graph_plant()
    part = line_graph_partition()
    pair = build_projection(part, WeightVectors.ones(3, 4))
    res = synthesize_hierarchical(g, pair)
    controller = res.controller
    k = controller.expand()
    closed = lft_lower(g, k)
    # array disturbance of zeros with the right sample count
    absc = float(np.max(np.abs(np.linalg.eigvals(closed.a))))
    dt = 0.05 / absc
    steps = int(np.ceil(1.0 / dt))
    w = np.zeros((steps + 1, g.m1))
    sim = run_hier_simulation(g, controller, horizon=1.0, dt=dt,
                              disturbance=("array", w), partition=part)
    assert np.allclose(sim.x, 0.0)
    assert np.allclose(sim.u, 0.0)
    assert np.allclose(sim.z, 0.0)


def test_dynamic_controller_staged_equals_monolithic():
    g = line_graph_plant()
    part = line_graph_partition()
    pair = build_projection(part, WeightVectors.ones(3, 4))
    res = synthesize_hierarchical(g, pair)
    sim = run_hier_simulation(g, res.controller, horizon=3.0,
                              disturbance=("noise", 11, 0.5), partition=part)
    assert sim.staged_vs_monolithic <= 1e-9
    assert privacy_audit(sim.trace)


def test_impulse_energy_matches_gramian():
    spec = NetworkSpec.even_blocks(n_s=24, n_blocks=3, p_in=0.8, p_out=0.05,
                                   a_lo=2.0, a_hi=3.0, seed=5)
    g = generate_consensus_network(spec)
    part = ClusterPartition.from_subsystems(spec.planted_partition, g)
    pair = build_projection(part, WeightVectors.ones(g.n_u, g.n_y))
    res = synthesize_hierarchical(g, pair)
    closed = res.closed_loop
    # impulse on disturbance channel 0: energy of z equals the (0,0) entry
    # of B' Phi_o B for the observability Gramian of the closed loop
    phi_o = solve_lyapunov(closed.a.T, closed.c.T, check_hurwitz=False)
    energy_ref = float((closed.b.T @ phi_o @ closed.b)[0, 0])
    slowest = -max(np.real(np.linalg.eigvals(closed.a)))
    horizon = 14.0 / slowest
    sim = run_hier_simulation(g, res.controller, horizon=horizon,
                              disturbance=("impulse", 0), partition=part)
    dt = sim.times[1] - sim.times[0]
    energy = np.trapezoid(np.einsum("ij,ij->i", sim.z, sim.z), dx=dt)
    assert energy == pytest.approx(energy_ref, rel=2e-2)
    assert sim.staged_vs_monolithic <= 1e-9


def test_unstable_closed_loop_rejected():
    g = line_graph_plant()
    unstable = GeneralizedPlant(
        a=g.a + 2.0 * np.eye(4), b1=g.b1, b2=g.b2, c1=g.c1, c2=g.c2,
        d12=g.d12, d21=g.d21, subsystems=g.subsystems)
    part = line_graph_partition()
    pair = build_projection(part, WeightVectors.ones(3, 4))
    controller = HierarchicalController(
        p_u=pair.p_u, k_tilde=StateSpace.zero(2, 2), p_y=pair.p_y)
    with pytest.raises(UnstableClosedLoop):
        run_hier_simulation(unstable, controller, horizon=1.0,
                            disturbance=("impulse", 0), partition=part)


def test_dt_limit_enforced():
    g = line_graph_plant()
    part = line_graph_partition()
    pair = build_projection(part, WeightVectors.ones(3, 4))
    res = synthesize_hierarchical(g, pair)
    with pytest.raises(ValueError):
        run_hier_simulation(g, res.controller, horizon=1.0, dt=10.0,
                            disturbance=("impulse", 0), partition=part)
