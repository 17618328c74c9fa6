# rodmodel/statics.py
"""텐던 구동 Cosserat 로드의 정역학 미분방정식.

텐던 하중이 변형률 미분(ν′, κ′)에 의존하므로, 매 평가마다 6×6 선형계를 풀어
암시적 하중을 명시적 형태로 바꾼다. 중력과 외력은 없다.
"""
from typing import NamedTuple, Optional

import numpy as np

from config.settings import Config
from errors import IntegrationBlowupError, SolverDegeneracyError
from model import DesignVector, SolverConfig
from rodmodel.material import stiffness_from_material
from rodmodel.routing import base_angles, routing_terms
from rodmodel.state import RodState, hat, pack, unpack

E_Z = np.array([0.0, 0.0, 1.0])


class RodDerivative(NamedTuple):
    dr: np.ndarray
    dR: np.ndarray
    dn: np.ndarray
    dm: np.ndarray


def _body(R: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Rᵀx (일괄)."""
    return np.einsum("bji,bj->bi", R, x)


def _world(R: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.einsum("bij,bj->bi", R, x)


class TendonRod:
    """한 설계(와 장력 배율)에 대한 로드 모델. 상태 묶음 (B, 18)을 한 번에 평가한다."""

    def __init__(self, design: DesignVector, config: Optional[SolverConfig] = None, tension_scale: float = 1.0):
        config = config or SolverConfig()
        x = design.to_array()
        self.design = design
        self.offsets = x[0:4]
        self.pitches = x[4:8]
        self.tensions = x[8:12] * tension_scale
        self.length = design.backbone_length
        self.angles = base_angles(Config.N_TENDONS, config.routing_phase)

        k = stiffness_from_material(design.youngs_modulus, design.backbone_radius, config.poisson)
        self.K_se = k.K_se
        self.K_bt = k.K_bt
        self.K_se_inv = np.diag(1.0 / np.diag(k.K_se))
        self.K_bt_inv = np.diag(1.0 / np.diag(k.K_bt))
        self.condition_limit = Config.CONDITION_LIMIT

    def routing(self, s: float):
        return routing_terms(self.offsets, self.pitches, self.angles, s)

    def strains(self, R: np.ndarray, n: np.ndarray, m: np.ndarray):
        """구성 법칙 역변환: ν = K_se⁻¹Rᵀn + ν₀, κ = K_bt⁻¹Rᵀm."""
        v = _body(R, n) @ self.K_se_inv.T + E_Z
        u = _body(R, m) @ self.K_bt_inv.T
        return v, u

    def tendon_tangents_body(self, s: float, v: np.ndarray, u: np.ndarray):
        """바디 프레임의 텐던 경로 미분 ṗ_i과 단위 접선. shape (B, N_t, 3)."""
        rho, d1, _ = self.routing(s)
        pb = np.cross(u[:, None, :], rho[None]) + d1[None] + v[:, None, :]
        norm = np.linalg.norm(pb, axis=-1, keepdims=True)
        return pb, pb / norm

    def distributed_loads(self, s: float, Y: np.ndarray):
        """분포 하중 계수와 (ν′, κ′)를 푼 결과.

        반환: (v, u, vdot, udot, f_body, l_body). f_body, l_body는 바디 프레임의
        텐던 분포 힘/모멘트 합이다.
        """
        r, R, n, m = unpack(Y)
        v, u = self.strains(R, n, m)
        rho, d1, d2 = self.routing(s)

        pb = np.cross(u[:, None, :], rho[None]) + d1[None] + v[:, None, :]
        norm = np.linalg.norm(pb, axis=-1)
        P = hat(pb)
        A_i = -self.tensions[None, :, None, None] * (P @ P) / norm[..., None, None] ** 3
        rho_hat = hat(rho)
        B_i = rho_hat[None] @ A_i

        A = A_i.sum(axis=1)
        B = B_i.sum(axis=1)
        G = -(A_i @ rho_hat[None]).sum(axis=1)
        H = -(B_i @ rho_hat[None]).sum(axis=1)

        drive = np.cross(u[:, None, :], pb) + np.cross(u[:, None, :], d1[None]) + d2[None]
        a_i = np.einsum("btij,btj->bti", A_i, drive)
        a = a_i.sum(axis=1)
        b = np.cross(rho[None], a_i).sum(axis=1)

        strain_force = (v - E_Z) @ self.K_se.T
        d = -np.cross(u, strain_force) - a
        c = -np.cross(u, u @ self.K_bt.T) - np.cross(v, strain_force) - b

        M = np.empty((Y.shape[0], 6, 6))
        M[:, :3, :3] = self.K_se + A
        M[:, :3, 3:] = G
        M[:, 3:, :3] = B
        M[:, 3:, 3:] = self.K_bt + H

        cond = np.linalg.cond(M)
        worst = float(np.max(cond))
        if not np.isfinite(worst) or worst > self.condition_limit:
            raise SolverDegeneracyError(f"strain-rate system is singular at s={s:.6g}", worst)

        sol = np.linalg.solve(M, np.concatenate([d, c], axis=1)[..., None])[..., 0]
        vdot, udot = sol[:, :3], sol[:, 3:]

        f_body = a + np.einsum("bij,bj->bi", A, vdot) + np.einsum("bij,bj->bi", G, udot)
        l_body = b + np.einsum("bij,bj->bi", B, vdot) + np.einsum("bij,bj->bi", H, udot)
        return v, u, vdot, udot, f_body, l_body

    def rhs(self, s: float, Y: np.ndarray) -> np.ndarray:
        """d/ds (r, R, n, m) for a (B, 18) batch."""
        if not np.all(np.isfinite(Y)):
            raise IntegrationBlowupError(s)
        r, R, n, m = unpack(Y)
        v, u, _, _, f_body, l_body = self.distributed_loads(s, Y)

        dr = _world(R, v)
        dR = R @ hat(u)
        dn = -_world(R, f_body)
        dm = -np.cross(dr, n) - _world(R, l_body)
        return pack(dr, dR, dn, dm)

    def tendon_forces(self, s: float, Y: np.ndarray):
        """월드 프레임의 τ_i t_i(s)와 텐던 부착점 Rρ_i(s). shape (B, N_t, 3)."""
        r, R, n, m = unpack(Y)
        v, u = self.strains(R, n, m)
        _, t_body = self.tendon_tangents_body(s, v, u)
        t = np.einsum("bij,btj->bti", R, t_body)
        rho, _, _ = self.routing(s)
        arm = np.einsum("bij,tj->bti", R, rho)
        return self.tensions[None, :, None] * t, arm

    def tip_loads(self, Y_tip: np.ndarray):
        """텐던 종단이 팁에 가하는 점하중의 부호 반전: (Σ τ t, Σ (Rρ)×τ t)."""
        force, arm = self.tendon_forces(self.length, Y_tip)
        return force.sum(axis=1), np.cross(arm, force).sum(axis=1)

    def straight_guess(self) -> np.ndarray:
        """곧은 로드 가정에서의 기저 하중 추정 (n0, m0)."""
        Y = pack(np.zeros((1, 3)), np.eye(3)[None], np.zeros((1, 3)), np.zeros((1, 3)))
        force, arm = self.tendon_forces(0.0, Y)
        n0 = -force.sum(axis=1)[0]
        m0 = -np.cross(arm, force).sum(axis=1)[0]
        return np.concatenate([n0, m0])


def rod_ode_rhs(state: RodState, design: DesignVector, config: Optional[SolverConfig] = None) -> RodDerivative:
    rod = TendonRod(design, config)
    dY = rod.rhs(state.s, state.to_vector()[None])[0]
    dr, dR, dn, dm = unpack(dY)
    return RodDerivative(dr=dr, dR=dR, dn=dn, dm=dm)
