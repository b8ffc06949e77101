// SPDX-License-Identifier: Apache-2.0

fn main() {
    routeplace_cli::init_logging();
    std::process::exit(routeplace_cli::dispatch(std::env::args_os()));
}
