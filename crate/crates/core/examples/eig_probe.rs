use ndarray::Array2;
use num_complex::Complex64;
use stabcert_core::linalg::{eigh_hermitian, eigh_real, matmul_complex};
use std::time::Instant;

fn main() {
    let n = 1728;
    let mut a = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..i {
            let re = ((i * 31 + j * 17) % 97) as f64 / 97.0;
            let im = ((i * 7 + j * 13) % 89) as f64 / 89.0;
            a[[i, j]] = Complex64::new(re, im);
            a[[j, i]] = Complex64::new(re, -im);
        }
        a[[i, i]] = Complex64::new(n as f64, 0.0);
    }
    let t0 = Instant::now();
    let eig = eigh_hermitian(&a).expect("zheevd failed");
    println!("zheevd n={n}: {:.2} s, lambda_min={:.4}", t0.elapsed().as_secs_f64(), eig.values[0]);

    let t0 = Instant::now();
    let p = matmul_complex(&eig.vectors, &a);
    println!("zgemm n={n}: {:.2} s, p[0,0]={:.3}", t0.elapsed().as_secs_f64(), p[[0, 0]].re);

    let m = 2744;
    let mut b = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..=i {
            let v = ((i * 31 + j * 17) % 97) as f64 / 97.0;
            b[[i, j]] = v;
            b[[j, i]] = v;
        }
        b[[i, i]] += m as f64;
    }
    let t0 = Instant::now();
    let eig = eigh_real(&b).expect("dsyevd failed");
    println!("dsyevd n={m}: {:.2} s, lambda_min={:.4}", t0.elapsed().as_secs_f64(), eig.values[0]);

    let mc = 2744;
    let mut c = Array2::<Complex64>::zeros((mc, mc));
    for i in 0..mc {
        for j in 0..i {
            let re = ((i * 31 + j * 17) % 97) as f64 / 97.0;
            let im = ((i * 7 + j * 13) % 89) as f64 / 89.0;
            c[[i, j]] = Complex64::new(re, im);
            c[[j, i]] = Complex64::new(re, -im);
        }
        c[[i, i]] = Complex64::new(mc as f64, 0.0);
    }
    let t0 = Instant::now();
    let eig = eigh_hermitian(&c).expect("zheevd failed");
    println!("zheevd n={mc}: {:.2} s, lambda_min={:.4}", t0.elapsed().as_secs_f64(), eig.values[0]);
}
