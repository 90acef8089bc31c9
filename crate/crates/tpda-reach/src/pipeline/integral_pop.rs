use crate::tpda::Tpda;
use crate::Result;

use super::StageOutput;

pub fn remove_integral_pops(_p: &Tpda) -> Result<StageOutput> {
    unimplemented!()
}
