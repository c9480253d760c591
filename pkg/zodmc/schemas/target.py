from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from zodmc.services.gmm import (
    GmmSpec,
    d1_gmm_spec,
    d4_gmm_spec,
    randomized_gmm_spec,
    scale_gmm_to_radius,
    standard_gaussian_spec,
)
from zodmc.services.target import (
    Target,
    apply_annulus_penalty,
    make_gmm,
    make_mueller_brown,
)


GMM_PRESETS = {
    "d1-gmm": d1_gmm_spec,
    "d4-gmm-5d": d4_gmm_spec,
}


class GmmTargetConfig(BaseModel):
    kind: Literal["gmm"] = "gmm"
    preset: Literal["d1-gmm", "d4-gmm-5d"] | None = Field(
        None, description="내장 혼합 분포 이름", examples=["d1-gmm"]
    )
    weights: list[float] | None = Field(None, description="성분 가중치")
    means: list[list[float]] | None = Field(None, description="성분 평균")
    covariances: list[list[list[float]]] | None = Field(None, description="성분 공분산")
    radius: float | None = Field(
        None, gt=0, description="anchor 모드를 이 반경에 두도록 평균을 늘림", examples=[26.0]
    )
    anchor: int = Field(1, ge=0, description="반경 기준 모드 번호")

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_source(self):
        explicit = (self.weights, self.means, self.covariances)
        if self.preset is None and any(v is None for v in explicit):
            raise ValueError("preset 또는 weights/means/covariances 를 모두 지정해야 합니다.")
        if self.preset is not None and any(v is not None for v in explicit):
            raise ValueError("preset 과 명시적 성분은 함께 쓸 수 없습니다.")
        return self

    def spec(self) -> GmmSpec:
        if self.preset is not None:
            spec = GMM_PRESETS[self.preset]()
        else:
            spec = GmmSpec(
                weights=np.asarray(self.weights),
                means=np.asarray(self.means),
                covariances=np.asarray(self.covariances),
            )
        if self.radius is not None:
            spec = scale_gmm_to_radius(spec, self.radius, self.anchor)
        return spec

    def build(self, seed: int = 0) -> Target:  # noqa: ARG002
        name = self.preset or "gmm"
        if self.radius is not None:
            name = f"{name}-r{self.radius:g}"
        return make_gmm(self.spec(), name=name)


class AnnulusTargetConfig(BaseModel):
    kind: Literal["gmm+annulus"] = "gmm+annulus"
    base: GmmTargetConfig = Field(
        default_factory=lambda: GmmTargetConfig(preset="d1-gmm"), description="벌점 전 혼합 분포"
    )
    inner: float = Field(5.0, ge=0, description="고리 안쪽 반경")
    outer: float = Field(11.0, gt=0, description="고리 바깥 반경")
    height: float = Field(8.0, ge=0, description="벌점 높이")

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_radii(self):
        if self.inner >= self.outer:
            raise ValueError(f"inner < outer 이어야 합니다. ({self.inner} ≥ {self.outer})")
        return self

    def build(self, seed: int = 0) -> Target:
        return apply_annulus_penalty(self.base.build(seed), self.inner, self.outer, self.height)


class MuellerBrownTargetConfig(BaseModel):
    kind: Literal["mueller-brown"] = "mueller-brown"
    beta: float = Field(0.1, gt=0, description="역온도 β")
    center: tuple[float, float] | None = Field(
        None, description="보정 이차항 중심. 없으면 가운데 우물 최소점을 찾음"
    )
    mueller_standard_form: bool = Field(
        False, description="세 번째 지수항을 음의 정부호 (-0.7, -0.6, -0.7) 형태로 바꿈"
    )

    model_config = ConfigDict(extra="forbid")

    def build(self, seed: int = 0) -> Target:  # noqa: ARG002
        center = None if self.center is None else np.asarray(self.center)
        return make_mueller_brown(self.beta, center, self.mueller_standard_form)


class RandomizedGmmTargetConfig(BaseModel):
    kind: Literal["randomized-gmm"] = "randomized-gmm"
    dim: int = Field(..., ge=1, description="차원", examples=[5])
    n_modes: int = Field(5, ge=1, description="모드 수")
    seed: int | None = Field(None, description="생성 시드. 없으면 실험 시드를 씀")

    model_config = ConfigDict(extra="forbid")

    def build(self, seed: int = 0) -> Target:
        rng = np.random.default_rng(self.seed if self.seed is not None else seed)
        spec = randomized_gmm_spec(self.dim, rng, self.n_modes)
        return make_gmm(spec, name=f"randomized-gmm-d{self.dim}")


class GaussianTargetConfig(BaseModel):
    kind: Literal["gaussian"] = "gaussian"
    dim: int = Field(2, ge=1, description="차원")

    model_config = ConfigDict(extra="forbid")

    def build(self, seed: int = 0) -> Target:  # noqa: ARG002
        return make_gmm(standard_gaussian_spec(self.dim), name="gaussian")


TargetConfig = Annotated[
    GmmTargetConfig
    | AnnulusTargetConfig
    | MuellerBrownTargetConfig
    | RandomizedGmmTargetConfig
    | GaussianTargetConfig,
    Field(discriminator="kind"),
]
