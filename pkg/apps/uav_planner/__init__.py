"""UAV Planner: joint cluster-head selection and UAV trajectory design"""
__version__ = "1.0.0"
