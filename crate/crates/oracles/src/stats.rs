/// Word count by scanning characters: a word is a maximal run of
/// non-whitespace that contains at least one letter or digit.
pub fn words(text: &str) -> usize {
    let mut count = 0;
    let mut in_word = false;
    let mut has_alnum = false;
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_whitespace() {
            if in_word && has_alnum {
                count += 1;
            }
            in_word = false;
            has_alnum = false;
        } else {
            in_word = true;
            has_alnum |= c.is_alphanumeric();
        }
    }
    count
}

/// Quantile by linear interpolation between the closest ranks.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let below = pos as usize;
    if below + 1 >= v.len() {
        return v[below];
    }
    let frac = pos - below as f64;
    v[below] * (1.0 - frac) + v[below + 1] * frac
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
