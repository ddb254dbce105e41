// temporary dissection test
#[test]
fn dissect_gradient() {
    use design_lab::sampling::{haar_unitary, random_skew_hermitian, RngStream};
    use design_lab::tensor::{adjoint, exp_skew_hermitian, hermitian_operator_basis, kron, partial_trace_all_but_raw};
    use ndarray::{s, Array1, Array2};
    use ndarray_linalg::c64;

    let (d_a, k, m) = (2usize, 2usize, 6usize);
    let stream = RngStream::new(303);
    let mut rng = stream.rng();
    let u0 = haar_unitary(m, &mut rng).unwrap().into_matrix();
    let g = random_skew_hermitian(m, &mut rng).unwrap();
    let basis = hermitian_operator_basis(d_a.pow(k as u32)).unwrap();
    let alpha = 1usize;
    let x_alpha = &basis.elements()[alpha];

    let f = |u: &Array2<c64>| -> f64 {
        let v = u.slice(s![.., ..d_a]);
        let mut tot = 0.0;
        for z in 0..m {
            let x: Array1<c64> = Array1::from_iter(v.row(z).iter().map(|e| e.conj()));
            let n2: f64 = x.iter().map(|e| e.norm_sqr()).sum();
            let p = n2 / d_a as f64;
            let vn = x.mapv(|e| e / c64::new(n2.sqrt(), 0.0));
            let mut vk = vn.clone();
            for _ in 1..k { vk = design_lab::tensor::kron_vec(&vk, &vn); }
            let xv = x_alpha.dot(&vk);
            let e: f64 = vk.iter().zip(xv.iter()).map(|(a,b)| (a.conj()*b).re).sum();
            tot += p * e;
        }
        tot
    };

    let h = 1e-6;
    let up = exp_skew_hermitian(&g, h).unwrap().dot(&u0);
    let um = exp_skew_hermitian(&g, -h).unwrap().dot(&u0);
    let fd = (f(&up) - f(&um)) / (2.0 * h);

    // naive full-matrix C = Σ_z [ Σ_l [Q_zl, Z_z] - (k-1) c_z [Qp_z, Z_z] ]
    let w = {
        let mut w = Array2::<c64>::zeros((m, d_a));
        for i in 0..d_a { w[[i,i]] = c64::new(1.0,0.0); }
        w
    };
    let v = u0.dot(&w);
    let mut c_total = Array2::<c64>::zeros((m, m));
    for z in 0..m {
        let x: Array1<c64> = Array1::from_iter(v.row(z).iter().map(|e| e.conj()));
        let n2: f64 = x.iter().map(|e| e.norm_sqr()).sum();
        let vn = x.mapv(|e| e / c64::new(n2.sqrt(), 0.0));
        let mut r = Array2::<c64>::zeros((d_a, d_a));
        for a in 0..d_a { for b in 0..d_a { r[[a,b]] = vn[a] * vn[b].conj(); } }
        let mut z_proj = Array2::<c64>::zeros((m, m));
        z_proj[[z, z]] = c64::new(1.0, 0.0);

        for l in 0..k {
            let mut t: Option<Array2<c64>> = None;
            for slot in 0..k {
                let fac: Array2<c64> = if slot == l { Array2::eye(d_a) } else { r.clone() };
                t = Some(match t { Some(acc) => kron(&acc, &fac), None => fac });
            }
            let prod = x_alpha.dot(&t.unwrap());
            let b = partial_trace_all_but_raw(&prod, d_a, l).unwrap().mapv(|e| e / c64::new(d_a as f64, 0.0));
            let q = u0.dot(&w).dot(&b).dot(&adjoint(&w)).dot(&adjoint(&u0));
            c_total = c_total + q.dot(&z_proj) - z_proj.dot(&q);
        }
        if k > 1 {
            let mut vk = vn.clone();
            for _ in 1..k { vk = design_lab::tensor::kron_vec(&vk, &vn); }
            let xv = x_alpha.dot(&vk);
            let cz: f64 = vk.iter().zip(xv.iter()).map(|(a,b)| (a.conj()*b).re).sum();
            let qp = u0.dot(&w).dot(&adjoint(&w)).dot(&adjoint(&u0)).mapv(|e| e / c64::new(d_a as f64, 0.0));
            let comm = qp.dot(&z_proj) - z_proj.dot(&qp);
            c_total = c_total - comm.mapv(|e| e * c64::new((k as f64 - 1.0) * cz, 0.0));
        }
    }
    let analytic_naive: c64 = c_total.dot(&g).diag().iter().sum();
    println!("fd           = {fd:.12}");
    println!("naive Tr[CG] = {:.12} + {:.3e} i", analytic_naive.re, analytic_naive.im);

    let probe = design_lab::bounds::GradientProbe::from_unitary(
        design_lab::sampling::HaarUnitary::new(u0.clone()).unwrap(), d_a, k).unwrap();
    let grad = design_lab::bounds::gradient_f_alpha(&probe, alpha).unwrap();
    let analytic_impl: c64 = adjoint(&grad).dot(&g.dot(&u0)).diag().iter().sum();
    println!("impl Tr[∇f†GU] = {:.12} + {:.3e} i", analytic_impl.re, analytic_impl.im);
}
