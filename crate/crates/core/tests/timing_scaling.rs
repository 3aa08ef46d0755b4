use greedytl::harness::{timing_profile, Method, TimingConfig};

// Single test in this binary so nothing else competes for the CPU.
#[test]
fn doubling_k_roughly_doubles_fit_time() {
    let run = |k| {
        timing_profile(&TimingConfig {
            m: 20,
            k,
            ps: vec![4000, 5000],
            repeats: 10,
            ..Default::default()
        })
        .unwrap()
    };
    let best = |k, method| {
        (0..3)
            .map(|_| run(k).seconds(method, 5000).unwrap())
            .fold(f64::INFINITY, f64::min)
    };
    for method in [Method::Greedytl, Method::Greedytl59] {
        let ratio = best(20, method) / best(10, method);
        assert!((1.6..=2.6).contains(&ratio), "{method}: k ratio {ratio}");
    }
}
