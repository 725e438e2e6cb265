//! Arithmetic in F_q and kernel inversion.
use hmm_polar::field::{KernelMatrix, PrimeField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = PrimeField::new(7)?;
    println!(
        "in F_7: 5 + 4 = {}, 3 * 5 = {}, -2 = {}",
        f.add(5, 4),
        f.mul(3, 5),
        f.neg(2)
    );
    for a in f.elements().skip(1) {
        println!("  {a}^-1 = {}", f.inv(a)?);
    }

    let kernel = KernelMatrix::new(5, &[vec![2, 1], vec![3, 3]])?;
    println!("kernel over F_5: {:?}", kernel.entries());
    println!("inverse:         {:?}", kernel.inverse_entries());
    let v = [4, 2];
    let w = kernel.mat_vec(&v, false)?;
    println!(
        "M {v:?} = {w:?}, M^-1 M v = {:?}",
        kernel.mat_vec(&w, true)?
    );

    match KernelMatrix::new(3, &[vec![1, 2], vec![2, 1]]) {
        Ok(_) => println!("unexpectedly invertible"),
        Err(e) => println!("[[1,2],[2,1]] over F_3: {e}"),
    }
    Ok(())
}
