use crate::tpda::Tpda;
use crate::Result;

use super::StageOutput;

pub fn split_ops(_p: &Tpda) -> Result<StageOutput> {
    unimplemented!()
}
