//! Checks on the real MNIST files; skipped with a note when they are absent.
//! Set `VILLANI_MNIST_DIR` to point elsewhere than `data/mnist`.

use std::path::{Path, PathBuf};

use villani_net::data::{load_idx, MnistFiles, IMAGES_MAGIC, LABELS_MAGIC};

fn files() -> Option<MnistFiles> {
    let dir = std::env::var_os("VILLANI_MNIST_DIR")
        .map_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"), PathBuf::from);
    let f = MnistFiles::in_dir(&dir);
    if f.exist() {
        Some(f)
    } else {
        eprintln!("MNIST files not found in {}, skipping", dir.display());
        None
    }
}

#[test]
fn headers_and_counts() {
    let Some(f) = files() else { return };
    for (img, lab, n) in [(&f.train_images, &f.train_labels, 60_000), (&f.test_images, &f.test_labels, 10_000)] {
        let img = load_idx(img).unwrap();
        let lab = load_idx(lab).unwrap();
        assert_eq!(img.magic, IMAGES_MAGIC);
        assert_eq!(lab.magic, LABELS_MAGIC);
        assert_eq!(img.dims, vec![n, 28, 28]);
        assert_eq!(lab.dims, vec![n]);
        assert!(lab.payload.iter().all(|&d| d <= 9));
    }
}

#[test]
fn digit_pairs_have_expected_sizes_and_scale() {
    let Some(f) = files() else { return };
    for ((a, b), train_n, test_n) in [((0, 1), 12_665, 2_115), ((2, 7), 12_223, 2_060)] {
        let (train, test) = f.load_pair(a, b).unwrap();
        assert_eq!((train.n(), test.n()), (train_n, test_n));
        assert_eq!(train.d(), 784);
        assert!((train.b_x() - 1.0).abs() < 1e-12);
        assert!(test.b_x() < 1.2);
        let (pos, _) = train.class_counts();
        // digit 0 has 5923 training images, digit 2 has 5958
        assert_eq!(pos, if a == 0 { 5_923 } else { 5_958 });
    }
}
