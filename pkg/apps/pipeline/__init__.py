"""
Pipeline orchestration: run configuration, stages and ablation sweeps behind the
management commands.
"""
