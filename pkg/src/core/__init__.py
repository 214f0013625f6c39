"""
核心：配置、异常与数据模型
"""
