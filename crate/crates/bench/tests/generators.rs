use tdf_bench::{codebook, gmm, sequence};
use tdf_core::{fisher_encode, spectrum_of_sequence, vlad_encode, Normalization};

#[test]
fn benchmark_inputs_are_accepted_by_the_encoders() {
    let seq = sequence(40, 8, 1);
    let spectrum = spectrum_of_sequence(&seq, 32).unwrap();
    assert_eq!(spectrum.length(), 32);
    let set = seq.descriptors();
    assert_eq!(
        fisher_encode(&gmm(4, 8, 2), set, Normalization::None)
            .unwrap()
            .len(),
        64
    );
    assert_eq!(
        vlad_encode(&codebook(4, 8, 3), set, Normalization::None)
            .unwrap()
            .len(),
        32
    );
}
