"""툴킷 전역 예외 계층."""


class KineticModesError(Exception):
    """모든 툴킷 예외의 기반 클래스."""


class ParameterDomain(KineticModesError, ValueError):
    """(alpha, beta) 또는 입력 파라미터가 허용 범위를 벗어남."""


class ConfigError(KineticModesError):
    """설정 파일 파싱/검증 실패."""


class NormalizationFailure(KineticModesError):
    """평형 분포 정규화(dilation root-find) 실패."""


class GridMismatch(KineticModesError, ValueError):
    """서로 다른 grid, sector, gauge 사이의 연산."""


class InsufficientRange(KineticModesError):
    """피팅/검증에 필요한 샘플 범위 부족."""


class NonPositiveValue(KineticModesError, ValueError):
    """로그 피팅 대상에 양수가 아닌 값이 포함됨."""


class CountMismatch(KineticModesError):
    """B(0, r_bar) 안의 고유값 개수가 5가 아님."""

    def __init__(self, message, counts=None):
        super().__init__(message)
        self.counts = counts or {}


class RootNotConverged(KineticModesError):
    """분산 관계 근 찾기가 수렴하지 않음."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class RootCollision(KineticModesError):
    """서로 다른 seed가 같은 근으로 수렴함."""


class BranchJump(KineticModesError):
    """연속 추적 중 예측 스텝보다 크게 튄 샘플."""

    def __init__(self, message, eta=None, label=None):
        super().__init__(message)
        self.eta = eta
        self.label = label


class DegenerateNullspace(KineticModesError):
    """축약 행렬의 null space 차원이 기대와 다름."""


class EigendecompositionFailure(KineticModesError):
    """고유분해가 실패했거나 고유벡터 행렬이 ill-conditioned."""
