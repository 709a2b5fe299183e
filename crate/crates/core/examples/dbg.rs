use nc_esprit::array_model::*;
use nc_esprit::signal_synth::*;
use nc_esprit::linalg::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;

fn main() {
    let grid = SamplingGrid::uniform(&[6]).unwrap();
    let mu = std::f64::consts::PI - 0.01;
    let src = SourceParams::new(DMatrix::from_row_slice(1, 1, &[mu]), vec![0.9]).unwrap();
    let a = steering_matrix(&grid, &src).unwrap();
    let model = SymbolModel::uncorrelated(src.phi()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let s = gen_symbols(&model, 4, &mut rng).unwrap();
    let x = &a * &s;
    let stacked = fast_real_stack(&x);

    // 1. does real SVD recompose?
    let svd = stacked.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let sig = DMatrix::<f64>::from_diagonal(&svd.singular_values);
    println!("real svd recon err: {:.3e}", (u * sig * vt - &stacked).norm());

    // 2. complex SVD of the same matrix
    let cx = to_complex(&stacked);
    let csvd = cx.clone().svd(true, true);
    let cu = csvd.u.as_ref().unwrap();
    let psi = unit_phasor(0.9);
    let apsi = a.map(|z| z * psi);
    let mut direct = DMatrix::<f64>::zeros(12, 1);
    for i in 0..6 { direct[(i,0)] = apsi[(i,0)].re; direct[(6+i,0)] = apsi[(i,0)].im; }
    println!("complex svd angle to direct: {:.3e}",
        principal_angles(&cu.columns(0,1).into_owned(), &to_complex(&direct))[0]);

    // 3. Gram route
    let gram = stacked.transpose() * &stacked;
    let eig = SymmetricEigen::new(gram.clone());
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let v1 = eig.eigenvectors.column(idx[0]).into_owned();
    let sigma1 = eig.eigenvalues[idx[0]].max(0.0).sqrt();
    let u1 = &stacked * v1 / sigma1;
    let dot: f64 = (0..12).map(|i| u1[i] * direct[(i,0)]).sum::<f64>() / direct.norm();
    println!("gram-route |dot| = {:.12}", dot.abs());
    println!("gram sigma1 = {sigma1}");
}
