/// SQL-style pattern match: `%` matches any run of characters, `_` exactly
/// one. Case-sensitive, no escape character.
pub fn like_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    // Position of the last `%` seen and the text index it was tried against.
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '_' || (p[pi] != '%' && p[pi] == t[ti])) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '%')
}

#[cfg(test)]
mod tests {
    use super::like_match;

    #[test]
    fn literal_and_wildcards() {
        assert!(like_match("abc", "abc"));
        assert!(!like_match("abc", "abcd"));
        assert!(like_match("a%", "a"));
        assert!(like_match("a%", "alice"));
        assert!(!like_match("a%", "Alice"));
        assert!(like_match("%ce", "alice"));
        assert!(like_match("a_i%", "alice"));
        assert!(!like_match("a_", "a"));
        assert!(like_match("%", ""));
        assert!(like_match("%%a%%", "xxaxx"));
        assert!(!like_match("", "x"));
        assert!(like_match("_é_", "aéb"));
    }

    fn reference(p: &[char], t: &[char]) -> bool {
        match (p.first(), t.first()) {
            (None, None) => true,
            (None, Some(_)) => false,
            (Some('%'), _) => reference(&p[1..], t) || (!t.is_empty() && reference(p, &t[1..])),
            (Some(_), None) => false,
            (Some('_'), Some(_)) => reference(&p[1..], &t[1..]),
            (Some(a), Some(b)) => a == b && reference(&p[1..], &t[1..]),
        }
    }

    proptest::proptest! {
        #[test]
        fn agrees_with_recursive_definition(p in "[ab%_]{0,6}", t in "[ab]{0,8}") {
            let pc: Vec<char> = p.chars().collect();
            let tc: Vec<char> = t.chars().collect();
            proptest::prop_assert_eq!(like_match(&p, &t), reference(&pc, &tc));
        }
    }
}
