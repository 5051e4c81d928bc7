"""Quick check that the compiled extension imports and behaves."""

import math
import tempfile
from pathlib import Path

import tiger


def main():
    stats = tiger.graph_stats(5, 8)
    assert stats["nodes"] == 40
    assert stats["static_edges_total"] == 80
    assert stats["self_history_total"] == 140
    assert stats["nbr_history_total"] == 560
    assert tiger.log_rule(5, 8) == 4
    assert tiger.neighborhood_size(5) == 11

    y = tiger.td_lambda_targets([1.0, -2.0, 3.0, 0.5], [7.0, 8.0, 9.0, 10.0], gamma=0.0, lam=0.0)
    assert y == [1.0, -2.0, 3.0, 0.5]

    env = tiger.Gather(n_agents=3, seed=1)
    obs, state, reward, done, info = env.reset()
    assert len(obs) == 3 and reward == 0.0 and not done
    optimal = int(info["optimal_goal"])
    _, _, reward, done, info = env.step([optimal] * 3)
    assert (reward, done, info["win"]) == (10.0, True, 1.0)

    tag = tiger.Tag(n_pursuers=2, n_adversaries=1, seed=3)
    obs, *_ = tag.reset()
    assert len(obs) == 2

    config = """
[env.gather]
n_agents = 3
[algo]
name = "qmix"
agent_hidden = 16
[train]
batch_size = 4
"""
    trainer = tiger.Trainer(config, seed=7)
    losses = [trainer.run_episode()[3] for _ in range(12)]
    assert losses[0] is None and all(math.isfinite(l) for l in losses[4:])
    mean, std = trainer.evaluate(10)
    assert 0.0 <= mean <= 1.0 and std >= 0.0

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "ck.bin"
        trainer.save(str(path))
        again = tiger.Trainer.load(str(path))
        assert again.env_steps == trainer.env_steps
        assert again.evaluate(10) == trainer.evaluate(10)

    try:
        tiger.Trainer("[graph]\nk_stat_nbr = 1.5\n")
    except ValueError as e:
        assert "k_stat_nbr" in str(e)
    else:
        raise AssertionError("out-of-range config accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
