macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/examples/",
                stringify!($name),
                ".rs"
            ));
        }

        #[test]
        fn $name() {
            $name::run_example().unwrap();
        }
    };
}

example!(spectrum);
example!(homogenize);
example!(simulate);
example!(fluctuations);
example!(ou_compare);
example!(boltzmann_gibbs);
example!(random_walk);
