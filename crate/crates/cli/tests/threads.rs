//! Separate binary: the worker-count variable is process-global.

#[test]
fn thread_variable_is_validated() {
    std::env::set_var("GSQG_THREADS", "zero");
    assert_eq!(gsqg_cli::run(["gsqg", "point-vortex", "pair", "--s", "0.5"]), 2);
    std::env::set_var("GSQG_THREADS", "2");
    assert_eq!(gsqg_cli::run(["gsqg", "point-vortex", "pair", "--s", "0.5"]), 0);
    assert_eq!(rayon::current_num_threads(), 2);
}
