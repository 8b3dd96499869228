"""Link spectrum, indicial roots and the stability certificate."""

from slcone.spectral import (
    cone_laplacian_residual,
    indicial_roots,
    link_spectrum,
    spectrum_error,
    stability_check,
)

table = link_spectrum(14)
print("gamma  mult   alpha      beta")
for g in table.gammas:
    p = indicial_roots(g)
    print(f"{g:5.1f}  {table.multiplicities[g]:4d}  {p.alpha:8.5f}  {p.beta:8.5f}")

print("\nfinite-difference link operator, largest relative error in the first 13 eigenvalues:")
for N in (32, 64, 128):
    print(f"  N={N:3d}: {spectrum_error(N):.3e}")

print("\nr^x v is harmonic on the cone exactly at the indicial roots:")
for x in (indicial_roots(6).alpha, 1.5):
    print(f"  mode (2,1), x={x:.3f}: relative residual {cone_laplacian_residual(x, (2, 1)):.2e}")

v = stability_check()
print("\n" + v.summary())
print(f"rate-one eigenspace: dimension {v.lambda1_multiplicity}, spanned by coordinates (rank {v.coordinate_rank})")
