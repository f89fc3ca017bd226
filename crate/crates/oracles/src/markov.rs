use rand::Rng;

/// Walks a Markov chain for `steps` states starting at `start`.
pub fn simulate<R: Rng>(matrix: &[Vec<f64>], start: usize, steps: usize, rng: &mut R) -> Vec<usize> {
    let mut state = start;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        out.push(state);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = &matrix[state];
        state = row.len() - 1;
        for (k, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                state = k;
                break;
            }
        }
    }
    out
}
