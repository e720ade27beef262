//! Function matrices on a grid: envelopes, rearrangement, sums, maxima and
//! composition with a disturbance matrix.

use convex_switching::pwc::{
    add, compose_linear, max_bind, row_rearrange, subgradient_envelope, FunctionMatrix, Grid,
};
use convex_switching::stochastic::ar_matrix;

fn show(name: &str, f: &FunctionMatrix, grid: &Grid) {
    println!("{name} ({} rows)", f.rows());
    for pt in grid.points() {
        println!(
            "  z2 = {:>5.2}  value = {:>8.4}",
            pt[1],
            f.evaluate(pt).unwrap()
        );
    }
}

fn main() -> convex_switching::Result<()> {
    let grid = Grid::line(5, -2.0, 2.0)?;

    let square = subgradient_envelope(|z| z[1] * z[1], |z| vec![0.0, 2.0 * z[1]], &grid)?;
    show("envelope of z2^2", &square, &grid);
    println!(
        "  between grid points: f(0.5) = {}",
        square.evaluate(&[1.0, 0.5])?
    );

    let kinked = FunctionMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0], vec![0.0, 0.0]])?;
    let canon = row_rearrange(&kinked, &grid)?;
    show("|z2| + 1 rearranged", &canon, &grid);

    show("sum", &add(&square, &canon)?, &grid);
    show("max", &max_bind(&square, &canon, &grid)?, &grid);

    let w = ar_matrix(0.3, 0.9);
    show(
        "envelope composed with z -> W z",
        &compose_linear(&square, &w, &grid)?,
        &grid,
    );
    Ok(())
}
