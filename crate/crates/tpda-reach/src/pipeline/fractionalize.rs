use crate::tpda::Tpda;
use crate::Result;

use super::StageOutput;

pub fn fractionalize(_p: &Tpda) -> Result<StageOutput> {
    unimplemented!()
}
