//! placeholder
pub struct Certificate;
pub struct CertificateStatus;
pub struct Problem;
