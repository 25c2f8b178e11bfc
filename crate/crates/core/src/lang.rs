use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Languages accepted by the document translation service (ISO 639-1).
pub const SERVICE_LANGUAGES: [&str; 33] = [
    "ar", "bg", "cs", "da", "de", "el", "en", "es", "et", "fi", "fr", "he", "hu", "id", "it", "ja", "ko",
    "lt", "lv", "nb", "nl", "pl", "pt", "ro", "ru", "sk", "sl", "sv", "th", "tr", "uk", "vi", "zh",
];

/// A lowercase two-letter ISO 639-1 language code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Lang(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid ISO 639-1 language code {0:?}")]
pub struct LangError(pub String);

impl Lang {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_service_supported(&self) -> bool {
        SERVICE_LANGUAGES.contains(&self.0.as_str())
    }

    /// Code as the service expects it in `source_lang`.
    pub fn service_source_code(&self) -> String {
        self.0.to_ascii_uppercase()
    }

    /// Code as the service expects it in `target_lang`; English and
    /// Portuguese need a regional variant there.
    pub fn service_target_code(&self) -> String {
        match self.0.as_str() {
            "en" => "EN-US".to_string(),
            "pt" => "PT-PT".to_string(),
            other => other.to_ascii_uppercase(),
        }
    }
}

impl FromStr for Lang {
    type Err = LangError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code = s.trim();
        if code.len() == 2 && code.chars().all(|c| c.is_ascii_alphabetic()) {
            Ok(Lang(code.to_ascii_lowercase()))
        } else {
            Err(LangError(s.to_string()))
        }
    }
}

impl TryFrom<String> for Lang {
    type Error = LangError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Lang> for String {
    fn from(l: Lang) -> String {
        l.0
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_normalizes() {
        assert_eq!("FI".parse::<Lang>().unwrap().as_str(), "fi");
        assert!("fin".parse::<Lang>().is_err());
        assert!("f1".parse::<Lang>().is_err());
        assert!("".parse::<Lang>().is_err());
    }

    #[test]
    fn service_codes() {
        let en: Lang = "en".parse().unwrap();
        assert_eq!(en.service_source_code(), "EN");
        assert_eq!(en.service_target_code(), "EN-US");
        let fi: Lang = "fi".parse().unwrap();
        assert_eq!(fi.service_target_code(), "FI");
        assert!(fi.is_service_supported());
        assert!(!"xx".parse::<Lang>().unwrap().is_service_supported());
    }
}
