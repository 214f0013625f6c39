"""
服务层：散射、态引擎、光学元件与三个协议
"""
