NAME_DISPLAY_MAP: dict = {
    "stabilizable_AB2": "(A, B2) stabilizable",
    "no_unit_circle_unobservable_AC1": "(A, C1) has no unobservable unit-circle mode",
    "detectable_AC2": "(A, C2) detectable",
    "no_unit_circle_unstabilizable": "(A, [B1 B2]) has no uncontrollable unit-circle mode",
    "H_nonzero_at_unstable_poles": "Mean channel nonzero at unstable poles",
    "Gy_minimum_phase": "C2 (zI - A)^-1 [B1 B2] minimum phase",
    "C2Psi_full_column_rank": "C2 Psi full column rank",
    "full_state_measurement": "Full state measurement",
    "r1": "Relative degree from w",
    "r2": "Relative degree from u_d",
    "status": "Synthesis status",
    "order": "Controller order",
    "J_opt": "Optimal cost",
    "J_H2": "Mean-square H2 cost",
    "J_theory": "Theoretical cost",
    "J_sim": "Simulated power",
    "ci": "95% half-width",
    "ms_stable": "Mean-square stable",
    "rho_ghat": "Spectral radius of G",
    "margin": "Stability margin",
    "iterations": "MARE iterations",
    "residual": "MARE residual",
    "diverged": "Diverged runs",
}
