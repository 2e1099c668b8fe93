//! Text normalization and the normalized Levenshtein similarity shared by the
//! denoiser (OCR visibility check) and the evaluator (fuzzy text matching).

/// Case-folds and collapses runs of whitespace to single spaces, trimming ends.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Edit distance and the longer length (in chars) of two normalized strings.
pub fn edit_stats(a: &str, b: &str) -> (usize, usize) {
    let a = normalize_text(a);
    let b = normalize_text(b);
    let max_len = a.chars().count().max(b.chars().count());
    (strsim::levenshtein(&a, &b), max_len)
}

/// `100 * (1 - lev / max_len)` on normalized text; two empty strings score 100.
pub fn similarity(a: &str, b: &str) -> f64 {
    let (dist, max_len) = edit_stats(a, b);
    if max_len == 0 {
        return 100.0;
    }
    100.0 * (max_len - dist) as f64 / max_len as f64
}

/// `similarity(a, b) < threshold`, decided without rounding the ratio.
pub fn similarity_below(a: &str, b: &str, threshold: f64) -> bool {
    let (dist, max_len) = edit_stats(a, b);
    if max_len == 0 {
        return 100.0 < threshold;
    }
    ((100 * (max_len - dist)) as f64) < threshold * max_len as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook full-matrix edit distance, kept separate from the crate path.
    fn oracle_lev(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in d[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + sub);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("  Hello \t  WORLD\n"), "hello world");
        assert_eq!(normalize_text(""), "");
    }

    #[test]
    fn submit_vs_subrnit() {
        // m -> r substitution plus an inserted n: distance 2 over 7 chars.
        assert_eq!(oracle_lev("submit", "subrnit"), 2);
        let expected = 100.0 * (1.0 - 2.0 / 7.0);
        assert!((similarity("Submit", "Subrnit") - expected).abs() < 1e-12);
        assert!((expected - 71.428_571_428_571_43).abs() < 1e-9);
    }

    #[test]
    fn extremes() {
        assert_eq!(similarity("Submit", ""), 0.0);
        assert_eq!(similarity("Submit", "submit"), 100.0);
        assert_eq!(similarity("", "  "), 100.0);
    }

    #[test]
    fn threshold_boundary_is_strict() {
        let text = "a".repeat(50);
        let at_22 = format!("{}{}", "a".repeat(11), "b".repeat(39));
        assert_eq!(oracle_lev(&text, &at_22), 39);
        assert!(!similarity_below(&text, &at_22, 22.0));
        let text = "a".repeat(1000);
        let at_21_9 = format!("{}{}", "a".repeat(219), "b".repeat(781));
        assert!(similarity_below(&text, &at_21_9, 22.0));
    }

    #[test]
    fn matches_oracle_on_mixed_strings() {
        let words = ["kitten", "sitting", "Sign in", "sign-in", "über", "uber", "", "a b c"];
        for a in words {
            for b in words {
                let (dist, _) = edit_stats(a, b);
                assert_eq!(dist, oracle_lev(&normalize_text(a), &normalize_text(b)), "{a} / {b}");
            }
        }
    }
}
