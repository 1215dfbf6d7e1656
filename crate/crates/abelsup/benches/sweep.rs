// placeholder; filled in once certify lands
fn main() {}
