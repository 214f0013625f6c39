"""
异常定义
所有模拟错误都继承自 HeraldSimError，携带错误码和详细信息
"""

from typing import Any


class HeraldSimError(Exception):
    """模拟异常基类"""

    def __init__(
        self,
        message: str,
        code: str = "HERALDSIM_ERROR",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(message)
        self.message = message
        self.code = code
        self.details = details

    def __str__(self) -> str:
        if self.details:
            return f"[{self.code}] {self.message} {self.details}"
        return f"[{self.code}] {self.message}"


class ParameterError(HeraldSimError):
    """物理参数非法"""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message=message, code="INVALID_PARAMETER", details=details)


class SubsystemError(HeraldSimError):
    """子系统不存在、重复或不匹配"""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message=message, code="SUBSYSTEM_ERROR", details=details)


class NonUnitaryError(HeraldSimError):
    """矩阵不是幺正的"""

    def __init__(self, message: str = "Matrix is not unitary", details: dict[str, Any] | None = None):
        super().__init__(message=message, code="NON_UNITARY", details=details)


class StateError(HeraldSimError):
    """量子态不满足前置条件（零范数、光子不在指定路径等）"""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message=message, code="INVALID_STATE", details=details)


class DimensionError(HeraldSimError):
    """希尔伯特空间维度超限"""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message=message, code="DIMENSION_OVERFLOW", details=details)


class ConfigError(HeraldSimError):
    """运行配置错误"""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message=message, code="INVALID_CONFIG", details=details)
