use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use vow::{channel_new, finish, owned_promises, promises_of, run_root, spawn, Channel, Error, Promise};

#[test]
fn fresh_channel_owns_one_tail() {
    run_root(|| -> vow::Result<()> {
        let c = channel_new::<u32>()?;
        let tail = promises_of(&c);
        assert_eq!(tail.len(), 1);
        assert_eq!(owned_promises()?, vec![tail[0].id()]);
        c.send(0)?;
        let moved = promises_of(&c);
        assert_ne!(moved[0].id(), tail[0].id());
        assert_eq!(owned_promises()?, vec![moved[0].id()]);
        assert_eq!(c.recv()?, Some(0));
        spawn(&[&c], || ())?.join()?;
        Ok(())
    })
    .unwrap();
}

#[test]
fn promise_of_a_promise_is_itself() {
    run_root(|| -> vow::Result<()> {
        let p = Promise::<u8>::new()?;
        let ids: Vec<_> = promises_of(&p).iter().map(|a| a.id()).collect();
        assert_eq!(ids, vec![p.id()]);
        let v = vec![p.clone(), Promise::new()?];
        assert_eq!(promises_of(&v).len(), 2);
        for q in &v {
            q.set(0)?;
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn sends_arrive_in_order_across_tasks() {
    let report = run_root(|| -> vow::Result<Vec<u32>> {
        let c = Channel::new()?;
        let tx = c.clone();
        spawn(&[&c], move || -> vow::Result<()> {
            for i in 1..=100 {
                tx.send(i)?;
            }
            spawn(&[&tx], || ())?;
            Ok(())
        })?;
        (0..100).map(|_| c.recv().map(Option::unwrap)).collect()
    })
    .unwrap();
    assert_eq!(report.value.as_ref().unwrap().as_ref().unwrap(), &(1..=100).collect::<Vec<_>>());
    // The grandchild exits owning the final tail.
    assert_eq!(report.omitted_sets().count(), 1);
}

#[test]
fn sending_without_the_tail_is_not_owner() {
    run_root(|| -> vow::Result<()> {
        let c = channel_new::<u8>()?;
        let tx = c.clone();
        let exit = spawn(&[], move || tx.send(1))?.join()?;
        assert!(exit.cause.is_exceptional());
        spawn(&[&c], || ())?;
        Ok(())
    })
    .unwrap();
}

#[test]
fn receiving_on_your_own_empty_channel_is_a_self_deadlock() {
    run_root(|| -> vow::Result<()> {
        let c = channel_new::<u8>()?;
        match c.recv() {
            Err(Error::DeadlockDetected(r)) => assert_eq!(r.len(), 1),
            other => panic!("expected a deadlock, got {other:?}"),
        }
        c.send(1)?;
        assert_eq!(c.recv()?, Some(1));
        spawn(&[&c], || ())?;
        Ok(())
    })
    .unwrap();
}

#[test]
fn receiving_after_the_sender_gave_up_is_poisoned() {
    let report = run_root(|| -> vow::Result<()> {
        let c = channel_new::<u8>()?;
        let sender = spawn(&[&c], || ())?;
        match c.recv() {
            Err(Error::PoisonedPromise { report, .. }) => assert_eq!(report.task, sender.id()),
            other => panic!("expected poison, got {other:?}"),
        }
        Ok(())
    })
    .unwrap();
    assert_eq!(report.omitted_sets().count(), 1);
}

#[test]
fn finish_joins_every_spawned_task() {
    let done = Arc::new(AtomicUsize::new(0));
    let d = done.clone();
    run_root(move || -> vow::Result<()> {
        finish(|scope| -> vow::Result<()> {
            for _ in 0..3 {
                let d = d.clone();
                scope.spawn(&[], move || {
                    std::thread::sleep(std::time::Duration::from_millis(5));
                    d.fetch_add(1, Ordering::SeqCst);
                })?;
            }
            Ok(())
        })??;
        assert_eq!(d.load(Ordering::SeqCst), 3);
        Ok(())
    })
    .unwrap();
    assert_eq!(done.load(Ordering::SeqCst), 3);
}

#[test]
fn finish_join_is_independent_of_user_promises() {
    let report = run_root(|| -> vow::Result<()> {
        let p = Promise::<u8>::new()?;
        finish(|scope| scope.spawn(&[&p], || ()).map(|_| ()))??;
        assert!(p.is_completed());
        Ok(())
    })
    .unwrap();
    assert_eq!(report.omitted_sets().count(), 1);
    assert!(!report.cause.is_exceptional());
}

#[test]
fn nested_finish_scopes() {
    let order = Arc::new(std::sync::Mutex::new(Vec::new()));
    let o = order.clone();
    run_root(move || -> vow::Result<()> {
        finish(|outer| -> vow::Result<()> {
            let o1 = o.clone();
            outer.spawn(&[], move || {
                std::thread::sleep(std::time::Duration::from_millis(10));
                o1.lock().unwrap().push("outer");
            })?;
            finish(|inner| {
                let o2 = o.clone();
                inner.spawn(&[], move || o2.lock().unwrap().push("inner"))
            })??;
            o.lock().unwrap().push("inner joined");
            Ok(())
        })??;
        Ok(())
    })
    .unwrap();
    let order = order.lock().unwrap();
    assert_eq!(order.len(), 3);
    let pos = |s| order.iter().position(|x| *x == s).unwrap();
    assert!(pos("inner") < pos("inner joined"));
}

#[test]
fn closing_ends_the_stream_without_an_alarm() {
    let report = run_root(|| -> vow::Result<Vec<u32>> {
        let c = Channel::new()?;
        let tx = c.clone();
        spawn(&[&c], move || -> vow::Result<()> {
            tx.send(7)?;
            tx.send(8)?;
            tx.close()?;
            assert!(tx.is_closed());
            assert!(matches!(tx.send(9), Err(Error::NotOwner { .. })));
            Ok(())
        })?;
        let mut got = Vec::new();
        while let Some(v) = c.recv()? {
            got.push(v);
        }
        assert_eq!(c.recv()?, None);
        assert!(promises_of(&c).is_empty());
        Ok(got)
    })
    .unwrap();
    assert!(report.is_ok(), "{:?}", report.alarms);
    assert_eq!(report.value.unwrap().unwrap(), vec![7, 8]);
}

#[test]
fn dropping_a_long_unread_chain_does_not_overflow() {
    let report = run_root(|| -> vow::Result<()> {
        let c = Channel::new()?;
        for i in 0..200_000u32 {
            c.send(i)?;
        }
        c.close()?;
        assert_eq!(c.recv()?, Some(0));
        Ok(())
    })
    .unwrap();
    assert!(report.is_ok());
}
