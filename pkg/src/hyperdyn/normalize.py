"""Per-stream input/output standardization fitted on training data."""

import numpy as np


class Normalizer:
    """Named mean/std pairs. `None` behaves as the identity so the pure
    arithmetic of losses and examples stays exact in tests."""

    def __init__(self):
        self.stats: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def fit(self, name: str, data: np.ndarray):
        data = np.asarray(data, dtype=np.float64).reshape(-1, data.shape[-1])
        mean = data.mean(axis=0)
        std = np.maximum(data.std(axis=0), 1e-8)
        self.stats[name] = (mean, std)

    def norm(self, name: str, x: np.ndarray) -> np.ndarray:
        mean, std = self.stats[name]
        return (np.asarray(x, dtype=np.float64) - mean) / std

    def denorm(self, name: str, x: np.ndarray) -> np.ndarray:
        mean, std = self.stats[name]
        return np.asarray(x, dtype=np.float64) * std + mean

    def scale(self, name: str) -> np.ndarray:
        return self.stats[name][1]

    def state_dict(self) -> dict:
        out = {}
        for name, (mean, std) in self.stats.items():
            out[f"norm/{name}/mean"] = mean.copy()
            out[f"norm/{name}/std"] = std.copy()
        return out

    def load_state_dict(self, state: dict):
        names = sorted({k.split("/")[1] for k in state if k.startswith("norm/")})
        for name in names:
            self.stats[name] = (np.asarray(state[f"norm/{name}/mean"]),
                                np.asarray(state[f"norm/{name}/std"]))


def maybe_norm(normalizer, name, x):
    return x if normalizer is None else normalizer.norm(name, x)


def maybe_denorm(normalizer, name, x):
    return x if normalizer is None else normalizer.denorm(name, x)
