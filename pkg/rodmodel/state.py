# rodmodel/state.py
from dataclasses import dataclass

import numpy as np

STATE_DIM = 18  # r(3) + R(9, 행 우선) + n(3) + m(3)


def hat(v: np.ndarray) -> np.ndarray:
    """v × (·) 의 반대칭 행렬. 마지막 축이 3인 배열을 일괄 처리한다."""
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def project_rotation(R: np.ndarray) -> np.ndarray:
    """SVD 극분해로 가장 가까운 회전 행렬에 사영한다."""
    R = np.asarray(R, dtype=np.float64)
    shape = R.shape
    U, _, Vt = np.linalg.svd(R.reshape(-1, 3, 3))
    Q = U @ Vt
    flip = np.linalg.det(Q) < 0
    if np.any(flip):
        U[flip, :, -1] *= -1.0
        Q = U @ Vt
    return Q.reshape(shape)


def pack(r: np.ndarray, R: np.ndarray, n: np.ndarray, m: np.ndarray) -> np.ndarray:
    batch = r.shape[:-1]
    return np.concatenate([r, R.reshape(batch + (9,)), n, m], axis=-1)


def unpack(Y: np.ndarray):
    batch = Y.shape[:-1]
    return Y[..., 0:3], Y[..., 3:12].reshape(batch + (3, 3)), Y[..., 12:15], Y[..., 15:18]


def clamped_states(base_loads: np.ndarray) -> np.ndarray:
    """고정단(r=0, R=I)에서 시작하는 상태 묶음. base_loads shape (B, 6) = (n0, m0)."""
    base_loads = np.atleast_2d(np.asarray(base_loads, dtype=np.float64))
    B = base_loads.shape[0]
    r = np.zeros((B, 3))
    R = np.broadcast_to(np.eye(3), (B, 3, 3))
    return pack(r, R, base_loads[:, 0:3], base_loads[:, 3:6])


def reorthonormalize(Y: np.ndarray) -> np.ndarray:
    r, R, n, m = unpack(Y)
    return pack(r, project_rotation(R), n, m)


@dataclass(frozen=True)
class RodState:
    r: np.ndarray
    R: np.ndarray
    n: np.ndarray
    m: np.ndarray
    s: float = 0.0

    def to_vector(self) -> np.ndarray:
        return pack(np.asarray(self.r), np.asarray(self.R), np.asarray(self.n), np.asarray(self.m))

    @classmethod
    def from_vector(cls, y: np.ndarray, s: float) -> "RodState":
        r, R, n, m = unpack(np.asarray(y, dtype=np.float64))
        return cls(r=r.copy(), R=R.copy(), n=n.copy(), m=m.copy(), s=float(s))

    @classmethod
    def clamped(cls, n0=(0.0, 0.0, 0.0), m0=(0.0, 0.0, 0.0)) -> "RodState":
        return cls(
            r=np.zeros(3),
            R=np.eye(3),
            n=np.asarray(n0, dtype=np.float64),
            m=np.asarray(m0, dtype=np.float64),
            s=0.0,
        )

    def frame_error(self) -> float:
        return float(np.linalg.norm(self.R.T @ self.R - np.eye(3)))
