use hdc::*;
fn main() {
    let data = gen_signal_task(600, Seed(1)).unwrap();
    let std = standardize(&data, &data).unwrap();
    let cfg = EncoderConfig { kind: EncoderKind::Rff, hyper_dim: 10000, sigma_b: 1.5, seed: Seed(2) };
    let basis = build_basis(&cfg, 900).unwrap();
    let t0 = std::time::Instant::now();
    let _enc = basis.encode_matrix(std.features(), std.samples()).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let ops = 600.0 * 900.0 * 10000.0;
    println!("encode 600x900 -> D=10000 RFF: {:.3}s  ({:.2} Gop/s)", dt, ops / dt / 1e9);

    let cfg2 = EncoderConfig { kind: EncoderKind::Rp, ..cfg };
    let basis2 = build_basis(&cfg2, 900).unwrap();
    let t0 = std::time::Instant::now();
    let _enc = basis2.encode_matrix(std.features(), std.samples()).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("encode 600x900 -> D=10000 RP:  {:.3}s  ({:.2} Gop/s)", dt, ops / dt / 1e9);
}
