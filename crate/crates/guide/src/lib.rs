//! The book's chapters as doc modules, so `cargo test` runs their snippets.

macro_rules! chapter {
    ($name:ident, $file:literal) => {
        #[doc = include_str!(concat!("../../../book/src/", $file))]
        pub mod $name {}
    };
}

chapter!(introduction, "introduction.md");
chapter!(grid, "grid.md");
chapter!(planning, "planning.md");
chapter!(missions, "missions.md");
chapter!(protocol, "protocol.md");
chapter!(fusion, "fusion.md");
chapter!(ranking, "ranking.md");
chapter!(hub, "hub.md");
chapter!(cli, "cli.md");
