# Solvers, topology and experiment services
