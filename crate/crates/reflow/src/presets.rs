/// Coefficient presets accepted in `coefficients.preset`.
pub const PRESETS: &[(&str, &str)] = &[
    ("frozen", "all coefficients zero; optional m (defaults to d)"),
    ("bm", "Brownian motion: a_0 = 0, a_k = e_k, m = d"),
    ("linear-drift", "a_0(x) = A x with `matrix` A, a_k = noise_scale * e_k, m = d"),
    ("example2", "d = m = 2: a_1 = (1, 1/2), a_2 = (0, 1 + x1/2 + x2/4)"),
    ("inline", "polynomial components: drift[i], diffusion[k][i] as [[exponents], value] term lists"),
];
