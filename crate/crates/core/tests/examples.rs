macro_rules! example {
    ($module:ident, $test:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(bernstein_moments, bernstein_moments_runs, "bernstein_moments.rs");
example!(unbiased_tables, unbiased_tables_runs, "unbiased_tables.rs");
example!(log_reward_tables, log_reward_tables_runs, "log_reward_tables.rs");
example!(minimax_table, minimax_table_runs, "minimax_table.rs");
example!(pareto_frontier, pareto_frontier_runs, "pareto_frontier.rs");
example!(split_study, split_study_runs, "split_study.rs");
example!(taylor_failure, taylor_failure_runs, "taylor_failure.rs");
example!(table_files, table_files_runs, "table_files.rs");
example!(euclid_game, euclid_game_runs, "euclid_game.rs");
example!(kl_game, kl_game_runs, "kl_game.rs");
example!(command_line, command_line_runs, "command_line.rs");
