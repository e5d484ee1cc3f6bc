"""Watch the two-replica objective lose its unique maximiser.

Below the threshold the only local maximum of psi sits on the diagonal at
R(2 beta). Past it an off-diagonal local maximum appears, though for the
random orthogonal model the diagonal one stays global on this range. The
threshold search brackets where uniqueness is lost.
"""

from orthospin import RateFunction, SpectralMeasure, TransformProfile, beta_zero, maximize_psi

rom = RateFunction(TransformProfile(SpectralMeasure.two_point(0.5)))

for beta in (1.0, 2.0, 2.5, 2.6, 3.0):
    sol = maximize_psi(rom, beta)
    maxima = ", ".join(f"({x:.4f}, {y:.4f}) psi={v:.6f}" for x, y, v in sol.candidates)
    print(f"beta={beta:<4} global ({sol.x_star:.4f}, {sol.y_star:.4f})  local maxima: {maxima}")

print("threshold:", round(beta_zero(rom, (0.5, 4.0)), 4))
