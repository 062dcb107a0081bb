//! Every chapter of the guide under `book/src` is included here so that
//! `cargo test --doc` runs its code blocks against the current API.

macro_rules! chapters {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub mod $name {}
        )*
    };
}

chapters! {
    introduction => "introduction.md",
    tasks => "tasks.md",
    rtl => "rtl.md",
    cones => "cones.md",
    escalation => "escalation.md",
    calibration => "calibration.md",
    microtests => "microtests.md",
    episodes => "episodes.md",
    wrapping => "wrapping.md",
    bench => "bench.md",
    cli => "cli.md",
}
