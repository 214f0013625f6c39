"""
heraldsim - 预告式量子中继构件模拟
"""
