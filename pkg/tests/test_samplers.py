import numpy as np
import pytest

from kquad import kernels
from kquad.checks import enumerate_first_two, random_psd_gram, tv_distance
from kquad.domains import DiscreteSpace, from_discrete, unit_box
from kquad.errors import (AcceptanceStalledError, InvalidEnvelopeError,
                          RankExhaustedError)
from kquad.samplers import (SamplerConfig, SampleTrace, cvs_mcmc, gram_logdet,
                            iid_sampler, make_rng, rpcholesky_discrete,
                            rpcholesky_optimized, rpcholesky_rejection,
                            run_sampler, trial_rng)

TWO_POINT_GRAM = np.array([[2.0, 1.0], [1.0, 1.0]])


def two_point_space():
    return DiscreteSpace(np.array([[0.0], [1.0]]), np.array([1.0, 1.0]))


class TestSamplerConfig:
    def test_valid_defaults(self):
        cfg = SamplerConfig(n=4)
        assert cfg.trials_max == 100 and cfg.proposal_cap == 10**7

    @pytest.mark.parametrize("kwargs", [
        {"n": 0}, {"n": 2, "trials_max": 24}, {"n": 2, "trials_max": 1001},
        {"n": 2, "proposal_cap": 0}, {"n": 2, "mcmc_steps_factor": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SamplerConfig(**kwargs)


class TestDiscrete:
    def test_two_point_chain_enumeration(self):
        space = two_point_space()
        k = kernels.from_gram(TWO_POINT_GRAM)
        exact = enumerate_first_two(space, k)
        # P(first=a) = 2/3; the second node is then forced.
        assert exact[0, 1] == pytest.approx(2 / 3)
        assert exact[1, 0] == pytest.approx(1 / 3)
        assert exact[0, 0] == exact[1, 1] == 0.0
        runs = 20000
        counts = np.zeros(2)
        for t in range(runs):
            tr = rpcholesky_discrete(space, k, 2, trial_rng(3, t))
            first = int(round(tr.nodes[0, 0]))
            counts[first] += 1
            assert int(round(tr.nodes[1, 0])) == 1 - first
        sigma = np.sqrt((2 / 3) * (1 / 3) / runs)
        assert abs(counts[0] / runs - 2 / 3) <= 3 * sigma

    def test_diagonal_kernel_first_node_uniform(self):
        space = DiscreteSpace(np.arange(3.0)[:, None], np.ones(3))
        k = kernels.from_gram(np.eye(3))
        runs = 9000
        counts = np.zeros(3)
        for t in range(runs):
            tr = rpcholesky_discrete(space, k, 1, trial_rng(4, t))
            counts[int(round(tr.nodes[0, 0]))] += 1
        sigma = np.sqrt((1 / 3) * (2 / 3) / runs)
        assert np.all(np.abs(counts / runs - 1 / 3) <= 4 * sigma)

    def test_full_rank_exhaustion(self, rng):
        gram = random_psd_gram(make_rng(8), m=4) + 0.5 * np.eye(4)
        space = DiscreteSpace(np.arange(4.0)[:, None], np.ones(4))
        k = kernels.from_gram(gram)
        tr = rpcholesky_discrete(space, k, 4, rng)
        assert sorted(int(round(v)) for v in tr.nodes[:, 0]) == [0, 1, 2, 3]

    def test_rank_exhausted_error(self):
        gram = np.ones((3, 3))  # rank one
        space = DiscreteSpace(np.arange(3.0)[:, None], np.ones(3))
        k = kernels.from_gram(gram)
        with pytest.raises(RankExhaustedError):
            rpcholesky_discrete(space, k, 2, make_rng(0))


class TestRejection:
    def test_first_node_is_diagonal_measure(self):
        space = two_point_space()
        k = kernels.from_gram(np.array([[3.0, 0.0], [0.0, 1.0]]))
        m = from_discrete(space)
        runs = 20000
        counts = np.zeros(2)
        for t in range(runs):
            tr = rpcholesky_rejection(m, k, SamplerConfig(n=1, seed=5),
                                      trial_rng(5, t))
            counts[int(round(tr.nodes[0, 0]))] += 1
        sigma = np.sqrt(0.75 * 0.25 / runs)
        assert abs(counts[0] / runs - 0.75) <= 3 * sigma

    def test_five_atom_tv_against_enumeration(self):
        gram = random_psd_gram(make_rng(42))
        space = DiscreteSpace(np.arange(5.0)[:, None], np.full(5, 0.2))
        k = kernels.from_gram(gram)
        m = from_discrete(space)
        exact = enumerate_first_two(space, k)
        runs = 20000
        counts = np.zeros((5, 5))
        cfg = SamplerConfig(n=2, seed=9)
        for t in range(runs):
            tr = rpcholesky_rejection(m, k, cfg, trial_rng(9, t))
            counts[int(round(tr.nodes[0, 0])), int(round(tr.nodes[1, 0]))] += 1
        assert tv_distance(exact.ravel(), counts.ravel() / runs) < 0.03

    def test_acceptance_rate_decreases_with_step(self):
        # pooled acceptance = runs / total proposals at step i
        k = kernels.sobolev(1)
        m = unit_box(1)
        runs = 100
        props = np.zeros((runs, 32))
        for t in range(runs):
            tr = rpcholesky_rejection(m, k, SamplerConfig(n=32, seed=6),
                                      trial_rng(6, t))
            props[t] = tr.proposals_per_node
        pooled = runs / props.sum(axis=0)
        blocks = pooled.reshape(8, 4).mean(axis=1)
        assert np.all(np.diff(blocks) < 0)

    def test_runtime_law_proposals_vs_spectral_tail(self):
        # expected proposals at step i are at most 1/eta_{i-1}, the
        # trace-normalized spectral tail, so the product stays order one
        from kquad.theory import sobolev_sequence
        k = kernels.sobolev(1)
        m = unit_box(1)
        runs, n = 100, 32
        props = np.zeros((runs, n))
        for t in range(runs):
            tr = rpcholesky_rejection(m, k, SamplerConfig(n=n, seed=14),
                                      trial_rng(14, t))
            props[t] = tr.proposals_per_node
        seq = sobolev_sequence(1)
        trace = seq.total()
        eta = np.array([seq.tail_sum(i) / trace for i in range(n)])
        product = props.mean(axis=0) * eta
        assert np.all(product <= 2.0), f"max {product.max():.2f}"

    def test_proposal_cap_stall_carries_partial_trace(self):
        k = kernels.gaussian(2.0, 1)  # nearly rank-deficient on [0,1]
        m = unit_box(1)
        cfg = SamplerConfig(n=12, seed=1, proposal_cap=300)
        with pytest.raises(AcceptanceStalledError) as exc_info:
            rpcholesky_rejection(m, k, cfg, make_rng(1))
        trace = exc_info.value.trace
        assert isinstance(trace, SampleTrace)
        assert 0 < len(trace.nodes) < 12

    def test_trace_shape_and_wall_time(self):
        k = kernels.sobolev(1)
        m = unit_box(1)
        tr = rpcholesky_rejection(m, k, SamplerConfig(n=5, seed=2), make_rng(2))
        assert tr.nodes.shape == (5, 1)
        assert len(tr.proposals_per_node) == 5
        assert all(p >= 1 for p in tr.proposals_per_node)
        assert tr.wall_time > 0


class TestOptimized:
    def test_alpha_one_path_equals_rejection(self):
        # while alpha stays 1 both samplers consume the stream identically
        k = kernels.sobolev(1)
        m = unit_box(1)
        cfg = SamplerConfig(n=8, seed=11)
        a = rpcholesky_rejection(m, k, cfg, trial_rng(11, 0))
        b = rpcholesky_optimized(m, k, cfg, trial_rng(11, 0))
        assert b.alpha_history == []
        assert np.array_equal(a.nodes, b.nodes)
        assert a.proposals_per_node == b.proposals_per_node

    def test_five_atom_tv_with_forced_reoptimization(self):
        # strong off-diagonal correlation collapses the residual after the
        # first pick, forcing trials_max=25 stalls and exhaustive-scan alphas
        gram = 0.9 * np.ones((5, 5)) + 0.1 * np.eye(5)
        space = DiscreteSpace(np.arange(5.0)[:, None], np.full(5, 0.2))
        k = kernels.from_gram(gram)
        m = from_discrete(space)
        exact = enumerate_first_two(space, k)
        runs = 20000
        counts = np.zeros((5, 5))
        cfg = SamplerConfig(n=2, seed=13, trials_max=25)
        saw_alpha = False
        for t in range(runs):
            tr = rpcholesky_optimized(m, k, cfg, trial_rng(13, t))
            saw_alpha = saw_alpha or bool(tr.alpha_history)
            counts[int(round(tr.nodes[0, 0])), int(round(tr.nodes[1, 0]))] += 1
        assert saw_alpha
        assert tv_distance(exact.ravel(), counts.ravel() / runs) < 0.03

    def test_invalid_envelope_raises(self):
        m = unit_box(1)
        cfg = SamplerConfig(n=6, seed=3, trials_max=25)

        def bogus_optimizer(state, measure, rng):
            return 1e-12

        # force a stall by making acceptance tiny: gaussian collapses fast
        kg = kernels.gaussian(2.0, 1)
        with pytest.raises(InvalidEnvelopeError):
            rpcholesky_optimized(m, kg, cfg, make_rng(3),
                                 optimizer=bogus_optimizer)

    def test_alpha_history_recorded_and_decaying(self):
        # recomputed envelopes track the shrinking residual field (up to the
        # safety inflation, so the trend rather than strict monotonicity)
        k = kernels.sobolev(3)
        m = unit_box(1)
        cfg = SamplerConfig(n=64, seed=17, trials_max=25)
        tr = rpcholesky_optimized(m, k, cfg, make_rng(17))
        assert len(tr.alpha_history) >= 1
        assert all(a > 0 for a in tr.alpha_history)
        assert all(b <= a * 1.5 for a, b in
                   zip(tr.alpha_history, tr.alpha_history[1:]))
        assert tr.alpha_history[-1] < tr.alpha_history[0]


class TestIid:
    def test_histogram_chi_square(self, rng):
        from scipy import stats
        tr = iid_sampler(unit_box(1), 10**5, rng)
        counts, _ = np.histogram(tr.nodes[:, 0], bins=np.linspace(0, 1, 21))
        res = stats.chisquare(counts)
        assert res.pvalue >= 0.01

    def test_n_zero_empty_trace(self, rng):
        tr = iid_sampler(unit_box(2), 0, rng)
        assert tr.nodes.shape == (0, 2)
        assert tr.proposals_per_node == []

    def test_seed_determinism(self):
        a = iid_sampler(unit_box(3), 10, trial_rng(1, 5))
        b = iid_sampler(unit_box(3), 10, trial_rng(1, 5))
        assert np.array_equal(a.nodes, b.nodes)


class TestCvs:
    def test_identity_swap_has_unit_ratio(self):
        # replacing a node by itself keeps the determinant, so the Metropolis
        # factor is exactly 1/2
        k = kernels.from_gram(TWO_POINT_GRAM)
        S = np.array([[0.0], [1.0]])
        ld = gram_logdet(k, S)
        ratio = np.exp(min(gram_logdet(k, S) - ld, 0.0))
        assert 0.5 * min(1.0, ratio) == pytest.approx(0.5)

    def test_n1_stationary_matches_diagonal_measure(self):
        space = two_point_space()
        k = kernels.from_gram(np.array([[2.0, 0.0], [0.0, 1.0]]))
        m = from_discrete(space)
        runs = 4000
        counts = np.zeros(2)
        cfg = SamplerConfig(n=1, seed=21, mcmc_steps_factor=40)
        for t in range(runs):
            tr = cvs_mcmc(m, k, cfg, trial_rng(21, t))
            counts[int(round(tr.nodes[0, 0]))] += 1
        sigma = np.sqrt((2 / 3) * (1 / 3) / runs)
        assert abs(counts[0] / runs - 2 / 3) <= 4 * sigma

    def test_three_atom_pair_frequencies(self):
        # stationary law of unordered pairs is proportional to
        # det k(pair) * w_i * w_j; compare against chain occupancy
        gram = np.array([[1.0, 0.6, 0.2], [0.6, 1.0, 0.4], [0.2, 0.4, 1.0]])
        space = DiscreteSpace(np.arange(3.0)[:, None], np.ones(3))
        k = kernels.from_gram(gram)
        m = from_discrete(space)
        pairs = [(0, 1), (0, 2), (1, 2)]
        target = np.array([np.linalg.det(gram[np.ix_(p, p)]) for p in pairs])
        target = target / target.sum()
        occupancy = np.zeros(3)

        def on_step(S):
            i, j = sorted(int(round(v)) for v in S[:, 0])
            occupancy[pairs.index((i, j))] += 1

        cfg = SamplerConfig(n=2, seed=23, mcmc_steps_factor=500_000)
        cvs_mcmc(m, k, cfg, make_rng(23), on_step=on_step)
        emp = occupancy / occupancy.sum()
        assert tv_distance(target, emp) < 0.05

    def test_rank_exhausted_initialization(self):
        # duplicate atoms make every 2-subset singular with probability 1
        space = DiscreteSpace(np.zeros((2, 1)), np.ones(2))
        k = kernels.from_gram(np.ones((2, 2)))
        m = from_discrete(space)
        with pytest.raises(RankExhaustedError):
            cvs_mcmc(m, k, SamplerConfig(n=2, seed=1), make_rng(1))


class TestDispatchAndDeterminism:
    @pytest.mark.parametrize("name", ["rpc-rejection", "rpc-optimized", "iid", "cvs"])
    def test_determinism(self, name):
        m = unit_box(1)
        k = kernels.sobolev(1)
        cfg = SamplerConfig(n=10, seed=31)
        a = run_sampler(name, m, k, cfg, trial_rng(31, 2))
        b = run_sampler(name, m, k, cfg, trial_rng(31, 2))
        assert a.same_draws(b)
        assert a.sampler == name

    def test_discrete_dispatch_requires_atoms(self):
        with pytest.raises(ValueError):
            run_sampler("rpc-discrete", unit_box(1), kernels.sobolev(1),
                        SamplerConfig(n=2, seed=0))

    def test_unknown_sampler(self):
        with pytest.raises(ValueError):
            run_sampler("metropolis", unit_box(1), kernels.sobolev(1),
                        SamplerConfig(n=2, seed=0))
