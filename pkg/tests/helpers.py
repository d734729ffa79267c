"""Shared test helpers."""


def random_trajectory(enc, rng, tries=1000):
    """Assignment of ``S`` from a random feasible control sequence."""
    p = enc.problem
    for _ in range(tries):
        if p.initial_state is None:
            init = {v: p.state_options(v)[int(rng.integers(len(p.state_options(v))))] for v in p.vertices}
        else:
            init = p.initial_state
        ctl = [{v: p.C[v].sample(rng) for v in p.vertices} for _ in range(p.horizon)]
        a, ok = enc.trajectory_assignment(init, ctl)
        if ok:
            return a
    raise RuntimeError("no feasible trajectory found")
