from hypothesis import HealthCheck, settings

# timings on shared CI boxes vary a lot; examples are bounded by size instead
settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")
