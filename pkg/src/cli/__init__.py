"""命令行入口：coeff / sweep / run"""
